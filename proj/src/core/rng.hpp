// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace specflow {

// Seeded generator whose full state (engine and cached normal deviate) can be
// serialized, so training can resume bit-identically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double Uniform() { return uniform_(engine_); }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Integer in [lo, hi], inclusive.
  std::int64_t UniformInt(std::int64_t lo, std::int64_t hi);
  double Normal() { return normal_(engine_); }
  void FillNormal(std::span<double> out);
  bool Bernoulli(double p) { return Uniform() < p; }
  std::uint64_t NextSeed() { return engine_(); }

  std::string Serialize() const;
  static Rng Deserialize(const std::string& state);

  bool operator==(const Rng& other) const;

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace specflow
