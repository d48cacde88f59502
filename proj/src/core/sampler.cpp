// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sampler.hpp"

#include <cmath>
#include <sstream>

#include "error.hpp"

namespace specflow {

int SolverConfig::Steps() const {
  Require(dt > 0.0 && dt <= 1.0, ErrorCode::kInvalidArgument, "dt must lie in (0, 1]");
  const double steps = 1.0 / dt;
  const double rounded = std::round(steps);
  Require(std::abs(steps - rounded) < 1e-9, ErrorCode::kInvalidArgument,
          "1/dt must be an integer");
  return static_cast<int>(rounded);
}

std::vector<double> EulerSolve(const VectorFieldFn& field, std::span<const double> x0,
                               const SolverConfig& cfg) {
  const int steps = cfg.Steps();
  std::vector<double> x(x0.begin(), x0.end());
  for (int k = 0; k < steps; ++k) {
    const std::vector<double> v = field(x, k * cfg.dt);
    Require(v.size() == x.size(), ErrorCode::kShapeMismatch,
            "vector field changed the state dimension");
    double norm = 0.0;
    bool finite = true;
    for (double e : v) {
      finite = finite && std::isfinite(e);
      norm += e * e;
    }
    if (!finite) {
      std::ostringstream msg;
      msg << "non-finite vector field at step " << k << " (t=" << k * cfg.dt
          << ", |field|^2=" << norm << ")";
      Fail(ErrorCode::kNumerical, msg.str());
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += cfg.dt * v[i];
  }
  return x;
}

FeatureGrid SolveFeatures(const VectorFieldModel& model, const ConditionInput& cond,
                          const SolverConfig& solver, Rng& rng) {
  const FeatureGrid& shape = cond.features;
  Require(shape.channels == model.config.feature_channels, ErrorCode::kShapeMismatch,
          "condition channels do not match the model");
  std::vector<double> x0(shape.size());
  rng.FillNormal(x0);
  FeatureGrid state(shape.channels, shape.frames);
  const VectorFieldFn field = [&](std::span<const double> x, double t) {
    std::copy(x.begin(), x.end(), state.values.begin());
    return Forward(model, state, cond, t).values;
  };
  FeatureGrid out(shape.channels, shape.frames);
  out.values = EulerSolve(field, x0, solver);
  return out;
}

AudioSignal Generate(const VectorFieldModel& model, TaskKind task,
                     const AudioSignal& degraded, const AudioSignal* reference,
                     const GenerationParams& params, Rng& rng) {
  Require(model.config.feature_channels == params.stft.feature_channels(),
          ErrorCode::kShapeMismatch,
          "model feature channels do not match the STFT configuration");
  const ConditionInput cond =
      BuildCondition(task, degraded, reference, params.stft, params.compression,
                     params.prompt);
  const FeatureGrid estimate = SolveFeatures(model, cond, params.solver, rng);
  if (task == TaskKind::kTargetSpeakerExtract) {
    const std::size_t prompt = params.prompt.Samples();
    const AudioSignal full =
        SynthesizeFeatures(estimate, params.stft, params.compression,
                           prompt + degraded.size(), degraded.sample_rate);
    return TrimTseOutput(full, params.prompt, degraded.size());
  }
  return SynthesizeFeatures(estimate, params.stft, params.compression, degraded.size(),
                            degraded.sample_rate);
}

}  // namespace specflow
