// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Optimal-transport conditional probability path:
//   mu_t = t x1,   sigma_t = 1 - (1 - sigma_min) t,
//   psi_t(x0) = sigma_t x0 + t x1,
// whose time derivative x1 - (1 - sigma_min) x0 is the flow-matching target.

#pragma once

#include <span>
#include <vector>

#include "rng.hpp"

namespace specflow {

struct FlowPathConfig {
  double sigma_min = 1e-4;
  void Validate() const;
};

struct FlowState {
  std::vector<double> x;
  double t = 0.0;
};

struct TrainingTuple {
  double t = 0.0;
  std::vector<double> x0;
  std::vector<double> x1;
  std::vector<double> x_t;
  std::vector<double> target;
};

// Smallest denominator ConditionalVectorField accepts.
inline constexpr double kVectorFieldSingularity = 1e-8;

double SigmaT(double t, const FlowPathConfig& cfg);
std::vector<double> MuT(double t, std::span<const double> x1);
std::vector<double> PsiT(std::span<const double> x0, std::span<const double> x1,
                         double t, const FlowPathConfig& cfg);
std::vector<double> TargetVectorField(std::span<const double> x0,
                                      std::span<const double> x1,
                                      const FlowPathConfig& cfg);
std::vector<double> ConditionalVectorField(std::span<const double> x,
                                           std::span<const double> x1, double t,
                                           const FlowPathConfig& cfg);

// Mean of squared differences over all elements.
double CfmLoss(std::span<const double> predicted, std::span<const double> target);
// d CfmLoss / d predicted = 2 (predicted - target) / d.
std::vector<double> CfmLossGradient(std::span<const double> predicted,
                                    std::span<const double> target);

// Same objective restricted to the frames whose flag is set. Values are laid
// out frame-major with `channels` values per frame. With no flagged frame
// the loss is zero.
double MaskedCfmLoss(std::span<const double> predicted,
                     std::span<const double> target, int channels,
                     const std::vector<bool>& frame_flags);
std::vector<double> MaskedCfmLossGradient(std::span<const double> predicted,
                                          std::span<const double> target,
                                          int channels,
                                          const std::vector<bool>& frame_flags);

// t ~ U(0,1), x0 ~ N(0, I); x_t and target follow from the path.
TrainingTuple SampleTrainingTuple(std::span<const double> x1,
                                  const FlowPathConfig& cfg, Rng& rng);

}  // namespace specflow
