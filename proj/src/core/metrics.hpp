// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>
#include <string>
#include <vector>

#include "spectral.hpp"

namespace specflow {

// Scores of numerically perfect reconstructions are capped here so corpus
// aggregates stay finite.
inline constexpr double kSiSdrCapDb = 100.0;
// Utterances whose SI-SDR improvement is below this count as failures.
inline constexpr double kFailureThresholdDb = 1.0;
// Magnitude floor applied before the logarithm in the log-spectral distance.
inline constexpr double kLsdMagnitudeFloor = 1e-8;

double SiSdr(std::span<const double> estimate, std::span<const double> reference);
double SiSdr(const AudioSignal& estimate, const AudioSignal& reference);

double SiSdrImprovement(const AudioSignal& estimate, const AudioSignal& degraded,
                        const AudioSignal& reference);

// Fraction of values strictly below kFailureThresholdDb.
double FailureRate(std::span<const double> improvements);

// RMS over frames of the per-frame RMS difference of 10 log10 |X| across bins.
double LogSpectralDistance(const AudioSignal& estimate, const AudioSignal& reference,
                           const StftParams& params);

struct UtteranceScore {
  std::string id;
  double si_sdr = 0.0;
  double si_sdr_improvement = 0.0;
  double lsd = 0.0;
};

struct MetricsReport {
  std::vector<UtteranceScore> utterances;
  double mean_si_sdr = 0.0;
  double mean_si_sdr_improvement = 0.0;
  double mean_lsd = 0.0;
  double failure_rate = 0.0;
  std::size_t count = 0;

  void Add(UtteranceScore score);
  // Recomputes the aggregates as arithmetic means of the utterance values.
  void Finalize();
  // One JSON object per line: utterances first, then a summary record.
  std::string ToJsonLines() const;
  std::string SummaryTable() const;
};

}  // namespace specflow
