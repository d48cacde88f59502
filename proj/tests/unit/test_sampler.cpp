// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <vector>

#include "error.hpp"
#include "flowpath.hpp"
#include "rng.hpp"
#include "sampler.hpp"

using namespace specflow;

TEST_CASE("Euler over the exact field lands on the path endpoint in five steps") {
  Rng rng(1);
  const FlowPathConfig flow;
  std::vector<double> x0(200), x1(200);
  rng.FillNormal(x0);
  rng.FillNormal(x1);
  const SolverConfig solver;  // dt = 0.2
  CHECK(solver.Steps() == 5);

  int calls = 0;
  std::vector<double> times;
  const auto target = TargetVectorField(x0, x1, flow);
  const VectorFieldFn constant = [&](std::span<const double>, double t) {
    ++calls;
    times.push_back(t);
    return target;
  };
  const auto out = EulerSolve(constant, x0, solver);
  CHECK(calls == 5);
  CHECK(times == std::vector<double>{0.0, 0.2, 0.4, 0.6000000000000001, 0.8});
  double err = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) err = std::max(err, std::abs(out[i] - (x1[i] + flow.sigma_min * x0[i])));
  CHECK(err < 1e-10);

  // The state-dependent conditional field keeps Euler on the straight path.
  calls = 0;
  const VectorFieldFn conditional = [&](std::span<const double> x, double t) {
    ++calls;
    return ConditionalVectorField(x, x1, t, flow);
  };
  const auto out2 = EulerSolve(conditional, x0, solver);
  CHECK(calls == 5);
  err = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) err = std::max(err, std::abs(out2[i] - (x1[i] + flow.sigma_min * x0[i])));
  CHECK(err < 1e-10);
}

TEST_CASE("step size must tile the unit interval") {
  CHECK(SolverConfig{0.25}.Steps() == 4);
  CHECK(SolverConfig{1.0}.Steps() == 1);
  CHECK_THROWS_AS(SolverConfig{0.3}.Steps(), Error);
  CHECK_THROWS_AS(SolverConfig{0.0}.Steps(), Error);
  CHECK_THROWS_AS(SolverConfig{1.5}.Steps(), Error);
}

TEST_CASE("non-finite field values abort with the step") {
  const std::vector<double> x0{1.0, 2.0};
  const VectorFieldFn blowup = [](std::span<const double> x, double t) {
    std::vector<double> v(x.begin(), x.end());
    if (t > 0.5) v[1] = INFINITY;
    return v;
  };
  CHECK_THROWS_WITH_AS(EulerSolve(blowup, x0, SolverConfig{}), doctest::Contains("step 3"), Error);
}

TEST_CASE("generation keeps the input length") {
  Rng rng(2);
  ModelConfig cfg;
  cfg.num_layers = 1;
  cfg.model_dim = 16;
  cfg.num_heads = 2;
  cfg.feedforward_dim = 16;
  cfg.time_embed_dim = 8;
  GenerationParams params;
  params.stft = StftParams{62, 16};
  cfg.feature_channels = params.stft.feature_channels();
  const VectorFieldModel m = InitParameters(cfg, rng);
  AudioSignal x;
  x.samples.resize(1234);
  rng.FillNormal(x.samples);
  const AudioSignal y = Generate(m, TaskKind::kDenoise, x, nullptr, params, rng);
  CHECK(y.size() == x.size());

  AudioSignal ref;
  ref.samples.resize(20000);
  rng.FillNormal(ref.samples);
  const AudioSignal z = Generate(m, TaskKind::kTargetSpeakerExtract, x, &ref, params, rng);
  CHECK(z.size() == x.size());
  CHECK_THROWS_AS(Generate(m, TaskKind::kTargetSpeakerExtract, x, nullptr, params, rng), Error);
  params.stft = StftParams{126, 32};
  CHECK_THROWS_AS(Generate(m, TaskKind::kDenoise, x, nullptr, params, rng), Error);
}
