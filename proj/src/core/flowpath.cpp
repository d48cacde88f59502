// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "flowpath.hpp"

#include <cmath>
#include <string>

#include "error.hpp"

namespace specflow {

namespace {

void CheckTime(double t) {
  Require(t >= 0.0 && t <= 1.0, ErrorCode::kInvalidArgument,
          "time must lie in [0, 1], got " + std::to_string(t));
}

void CheckShapes(std::size_t a, std::size_t b) {
  Require(a == b, ErrorCode::kShapeMismatch,
          "vector sizes differ: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

void FlowPathConfig::Validate() const {
  Require(sigma_min >= 0.0 && sigma_min < 1.0, ErrorCode::kInvalidArgument,
          "sigma_min must lie in [0, 1)");
}

double SigmaT(double t, const FlowPathConfig& cfg) {
  CheckTime(t);
  return 1.0 - (1.0 - cfg.sigma_min) * t;
}

std::vector<double> MuT(double t, std::span<const double> x1) {
  CheckTime(t);
  std::vector<double> out(x1.size());
  for (std::size_t i = 0; i < x1.size(); ++i) out[i] = t * x1[i];
  return out;
}

std::vector<double> PsiT(std::span<const double> x0, std::span<const double> x1,
                         double t, const FlowPathConfig& cfg) {
  CheckShapes(x0.size(), x1.size());
  const double sigma = SigmaT(t, cfg);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = sigma * x0[i] + t * x1[i];
  return out;
}

std::vector<double> TargetVectorField(std::span<const double> x0,
                                      std::span<const double> x1,
                                      const FlowPathConfig& cfg) {
  CheckShapes(x0.size(), x1.size());
  const double keep = 1.0 - cfg.sigma_min;
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = x1[i] - keep * x0[i];
  return out;
}

std::vector<double> ConditionalVectorField(std::span<const double> x,
                                           std::span<const double> x1, double t,
                                           const FlowPathConfig& cfg) {
  CheckShapes(x.size(), x1.size());
  const double denom = SigmaT(t, cfg);
  if (denom < kVectorFieldSingularity) {
    Fail(ErrorCode::kNumerical,
         "conditional vector field is singular at t=" + std::to_string(t) +
             " (denominator " + std::to_string(denom) + ")");
  }
  const double keep = 1.0 - cfg.sigma_min;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x1[i] - keep * x[i]) / denom;
  return out;
}

double CfmLoss(std::span<const double> predicted, std::span<const double> target) {
  CheckShapes(predicted.size(), target.size());
  if (predicted.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predicted.size());
}

std::vector<double> CfmLossGradient(std::span<const double> predicted,
                                    std::span<const double> target) {
  CheckShapes(predicted.size(), target.size());
  std::vector<double> grad(predicted.size());
  const double scale = 2.0 / static_cast<double>(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    grad[i] = scale * (predicted[i] - target[i]);
  }
  return grad;
}

namespace {

std::size_t CountFlagged(std::span<const double> predicted, int channels,
                         const std::vector<bool>& frame_flags) {
  Require(channels > 0 &&
              predicted.size() == frame_flags.size() * static_cast<std::size_t>(channels),
          ErrorCode::kShapeMismatch, "frame flags do not match the grid");
  std::size_t n = 0;
  for (bool f : frame_flags) n += f ? 1 : 0;
  return n * static_cast<std::size_t>(channels);
}

}  // namespace

double MaskedCfmLoss(std::span<const double> predicted,
                     std::span<const double> target, int channels,
                     const std::vector<bool>& frame_flags) {
  CheckShapes(predicted.size(), target.size());
  const std::size_t count = CountFlagged(predicted, channels, frame_flags);
  if (count == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t l = 0; l < frame_flags.size(); ++l) {
    if (!frame_flags[l]) continue;
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = l * channels + c;
      const double d = predicted[i] - target[i];
      sum += d * d;
    }
  }
  return sum / static_cast<double>(count);
}

std::vector<double> MaskedCfmLossGradient(std::span<const double> predicted,
                                          std::span<const double> target,
                                          int channels,
                                          const std::vector<bool>& frame_flags) {
  CheckShapes(predicted.size(), target.size());
  const std::size_t count = CountFlagged(predicted, channels, frame_flags);
  std::vector<double> grad(predicted.size(), 0.0);
  if (count == 0) return grad;
  const double scale = 2.0 / static_cast<double>(count);
  for (std::size_t l = 0; l < frame_flags.size(); ++l) {
    if (!frame_flags[l]) continue;
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = l * channels + c;
      grad[i] = scale * (predicted[i] - target[i]);
    }
  }
  return grad;
}

TrainingTuple SampleTrainingTuple(std::span<const double> x1,
                                  const FlowPathConfig& cfg, Rng& rng) {
  for (double v : x1) {
    Require(std::isfinite(v), ErrorCode::kNumerical, "x1 contains non-finite values");
  }
  TrainingTuple tuple;
  tuple.t = rng.Uniform();
  tuple.x0.resize(x1.size());
  rng.FillNormal(tuple.x0);
  tuple.x1.assign(x1.begin(), x1.end());
  tuple.x_t = PsiT(tuple.x0, tuple.x1, tuple.t, cfg);
  tuple.target = TargetVectorField(tuple.x0, tuple.x1, cfg);
  return tuple;
}

}  // namespace specflow
