// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "flowpath.hpp"
#include "masking.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "tasks.hpp"
#include "vectorfield.hpp"

namespace specflow {

enum class SolverMethod { kEuler };

struct SolverConfig {
  double dt = 0.2;
  SolverMethod method = SolverMethod::kEuler;

  // Number of steps tiling [0, 1]; validates that 1/dt is an integer.
  int Steps() const;
  void Validate() const { (void)Steps(); }
};

// field(x, t) -> dx/dt.
using VectorFieldFn =
    std::function<std::vector<double>(std::span<const double>, double)>;

// x_{k+1} = x_k + dt field(x_k, k dt), k = 0 .. 1/dt - 1.
std::vector<double> EulerSolve(const VectorFieldFn& field, std::span<const double> x0,
                               const SolverConfig& cfg);

struct GenerationParams {
  StftParams stft;
  CompressionParams compression;
  SolverConfig solver;
  TsePromptSpec prompt;
};

// Solves the learned flow from x0 ~ N(0, I) under a fixed condition and
// returns the feature estimate.
FeatureGrid SolveFeatures(const VectorFieldModel& model, const ConditionInput& cond,
                          const SolverConfig& solver, Rng& rng);

// Full restoration pipeline: condition features from the task inputs, Euler
// solve, then unpack, decompress and inverse STFT. The output has the length
// of the degraded input (the mixture, for target speaker extraction).
AudioSignal Generate(const VectorFieldModel& model, TaskKind task,
                     const AudioSignal& degraded, const AudioSignal* reference,
                     const GenerationParams& params, Rng& rng);

}  // namespace specflow
