// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "error.hpp"

namespace specflow {

double SiSdr(std::span<const double> estimate, std::span<const double> reference) {
  Require(estimate.size() == reference.size(), ErrorCode::kShapeMismatch,
          "SI-SDR: length mismatch (" + std::to_string(estimate.size()) + " vs " +
              std::to_string(reference.size()) + ")");
  double ref_energy = 0.0;
  double cross = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    ref_energy += reference[i] * reference[i];
    cross += estimate[i] * reference[i];
  }
  Require(ref_energy > 0.0, ErrorCode::kInvalidArgument, "SI-SDR: silent reference");
  const double alpha = cross / ref_energy;
  double target = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double s = alpha * reference[i];
    const double e = s - estimate[i];
    target += s * s;
    error += e * e;
  }
  if (error <= 0.0) return kSiSdrCapDb;
  return std::min(kSiSdrCapDb, 10.0 * std::log10(target / error));
}

double SiSdr(const AudioSignal& estimate, const AudioSignal& reference) {
  return SiSdr(std::span<const double>(estimate.samples),
               std::span<const double>(reference.samples));
}

double SiSdrImprovement(const AudioSignal& estimate, const AudioSignal& degraded,
                        const AudioSignal& reference) {
  return SiSdr(estimate, reference) - SiSdr(degraded, reference);
}

double FailureRate(std::span<const double> improvements) {
  Require(!improvements.empty(), ErrorCode::kInvalidArgument,
          "failure rate of an empty list");
  const auto failures = std::count_if(improvements.begin(), improvements.end(),
                                      [](double v) { return v < kFailureThresholdDb; });
  return static_cast<double>(failures) / static_cast<double>(improvements.size());
}

double LogSpectralDistance(const AudioSignal& estimate, const AudioSignal& reference,
                           const StftParams& params) {
  Require(estimate.size() == reference.size(), ErrorCode::kShapeMismatch,
          "LSD: length mismatch");
  const ComplexSpectrogram e = Stft(estimate, params);
  const ComplexSpectrogram r = Stft(reference, params);
  double frame_sum = 0.0;
  for (int l = 0; l < e.frames; ++l) {
    double bin_sum = 0.0;
    for (int k = 0; k < e.bins(); ++k) {
      const double diff =
          10.0 * (std::log10(std::max(std::abs(e.at(k, l)), kLsdMagnitudeFloor)) -
                  std::log10(std::max(std::abs(r.at(k, l)), kLsdMagnitudeFloor)));
      bin_sum += diff * diff;
    }
    frame_sum += bin_sum / e.bins();
  }
  return std::sqrt(frame_sum / e.frames);
}

void MetricsReport::Add(UtteranceScore score) { utterances.push_back(std::move(score)); }

void MetricsReport::Finalize() {
  count = utterances.size();
  mean_si_sdr = mean_si_sdr_improvement = mean_lsd = failure_rate = 0.0;
  if (count == 0) return;
  std::vector<double> improvements;
  improvements.reserve(count);
  for (const UtteranceScore& u : utterances) {
    mean_si_sdr += u.si_sdr;
    mean_si_sdr_improvement += u.si_sdr_improvement;
    mean_lsd += u.lsd;
    improvements.push_back(u.si_sdr_improvement);
  }
  const double n = static_cast<double>(count);
  mean_si_sdr /= n;
  mean_si_sdr_improvement /= n;
  mean_lsd /= n;
  failure_rate = FailureRate(improvements);
}

std::string MetricsReport::ToJsonLines() const {
  std::ostringstream os;
  for (const UtteranceScore& u : utterances) {
    nlohmann::json j = {{"id", u.id},
                        {"si_sdr", u.si_sdr},
                        {"si_sdr_improvement", u.si_sdr_improvement},
                        {"lsd", u.lsd}};
    os << j.dump() << '\n';
  }
  nlohmann::json summary = {{"summary", true},
                            {"count", count},
                            {"si_sdr", mean_si_sdr},
                            {"si_sdr_improvement", mean_si_sdr_improvement},
                            {"lsd", mean_lsd},
                            {"failure_rate", failure_rate},
                            {"si_sdr_cap_db", kSiSdrCapDb}};
  os << summary.dump() << '\n';
  return os.str();
}

std::string MetricsReport::SummaryTable() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "utterances  SI-SDR/dB  SI-SDRi/dB  LSD/dB  FR\n"
                "%10zu  %9.3f  %10.3f  %6.3f  %.3f\n"
                "(SI-SDR capped at %.0f dB; failure = SI-SDRi < %.0f dB)\n",
                count, mean_si_sdr, mean_si_sdr_improvement, mean_lsd, failure_rate,
                kSiSdrCapDb, kFailureThresholdDb);
  return buf;
}

}  // namespace specflow
