// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "metrics.hpp"
#include "rng.hpp"

using namespace specflow;

namespace {

std::vector<double> RandomVector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  rng.FillNormal(v);
  return v;
}

double Dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("SI-SDR of a reference plus orthogonal error") {
  Rng rng(1);
  const auto ref = RandomVector(1000, rng);
  auto err = RandomVector(1000, rng);
  const double proj = Dot(err, ref) / Dot(ref, ref);
  for (std::size_t i = 0; i < err.size(); ++i) err[i] -= proj * ref[i];
  for (double target_db : {-10.0, 0.0, 12.5, 40.0}) {
    const double g = std::sqrt(Dot(ref, ref) / (Dot(err, err) * std::pow(10.0, target_db / 10.0)));
    std::vector<double> est(ref);
    for (std::size_t i = 0; i < est.size(); ++i) est[i] = 0.7 * (ref[i] + g * err[i]);
    CHECK(SiSdr(est, ref) == doctest::Approx(target_db).epsilon(1e-9));
  }
}

TEST_CASE("SI-SDR is invariant to rescaling the estimate") {
  Rng rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto ref = RandomVector(500, rng);
    auto est = RandomVector(500, rng);
    for (std::size_t i = 0; i < est.size(); ++i) est[i] += 2.0 * ref[i];
    const double base = SiSdr(est, ref);
    auto scaled = est;
    const double c = std::exp(rng.Uniform(-5.0, 5.0));
    for (double& v : scaled) v *= c;
    worst = std::max(worst, std::abs(SiSdr(scaled, ref) - base));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("SI-SDR edge cases") {
  const std::vector<double> ref{1.0, -2.0, 3.0};
  CHECK(SiSdr(ref, ref) == kSiSdrCapDb);
  CHECK_THROWS_AS(SiSdr(ref, std::vector<double>{0.0, 0.0, 0.0}), Error);
  CHECK_THROWS_AS(SiSdr(ref, std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(SiSdr(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("improvement is relative to the unprocessed input") {
  Rng rng(3);
  AudioSignal ref{RandomVector(800, rng)}, noisy = ref, better = ref;
  const auto n = RandomVector(800, rng);
  for (std::size_t i = 0; i < 800; ++i) {
    noisy.samples[i] += n[i];
    better.samples[i] += 0.1 * n[i];
  }
  CHECK(SiSdrImprovement(better, noisy, ref) == doctest::Approx(SiSdr(better, ref) - SiSdr(noisy, ref)));
  CHECK(SiSdrImprovement(better, noisy, ref) > 15.0);
}

TEST_CASE("failure rate matches a brute-force count") {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(rng.UniformInt(1, 50)));
    for (double& x : v) x = rng.Bernoulli(0.1) ? 1.0 : rng.Uniform(-3.0, 5.0);
    int below = 0;
    for (double x : v) below += x < 1.0 ? 1 : 0;
    CHECK(FailureRate(v) == static_cast<double>(below) / v.size());
  }
  CHECK(FailureRate(std::vector<double>{1.0, 1.0}) == 0.0);
  CHECK(FailureRate(std::vector<double>{0.999999}) == 1.0);
  CHECK_THROWS_AS(FailureRate(std::vector<double>{}), Error);
}

TEST_CASE("log-spectral distance") {
  Rng rng(5);
  const AudioSignal a{RandomVector(4000, rng)};
  AudioSignal b = a;
  for (double& v : b.samples) v *= 10.0;
  const StftParams p{510, 128};
  CHECK(LogSpectralDistance(a, a, p) == 0.0);
  // A uniform x10 gain is a 10 dB magnitude offset in every bin.
  CHECK(LogSpectralDistance(b, a, p) == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("report aggregates and serializes") {
  MetricsReport r;
  r.Add({"a", 10.0, 5.0, 1.0});
  r.Add({"b", 4.0, 0.5, 3.0});
  r.Finalize();
  CHECK(r.count == 2);
  CHECK(r.mean_si_sdr == 7.0);
  CHECK(r.mean_si_sdr_improvement == 2.75);
  CHECK(r.mean_lsd == 2.0);
  CHECK(r.failure_rate == 0.5);
  std::istringstream in(r.ToJsonLines());
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0]["id"] == "a");
  CHECK(rows[2]["failure_rate"] == 0.5);
  CHECK(r.SummaryTable().find("failure") != std::string::npos);
}
