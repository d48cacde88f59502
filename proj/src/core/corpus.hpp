// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>

#include "rng.hpp"
#include "spectral.hpp"
#include "tasks.hpp"

namespace specflow {

// Spectral identity of a synthetic talker.
struct ToySpeaker {
  double f0 = 120.0;
  std::vector<double> harmonic_gains;  // 3 to 6 entries
};

ToySpeaker RandomToySpeaker(Rng& rng);

// A "speech-like" clip: harmonics of a slowly vibrating f0, syllable-rate
// amplitude modulation, and a low-passed noise floor 30 dB below the voiced
// part. Output RMS is `rms`.
AudioSignal SpeechLikeClip(const ToySpeaker& speaker, double seconds, Rng& rng,
                           int sample_rate = 16000, double rms = 0.05);

struct CorpusOptions {
  double min_seconds = 1.0;
  double max_seconds = 3.0;
  double min_snr_db = 0.0;
  double max_snr_db = 10.0;
  int threads = 0;  // 0 = hardware concurrency
};

// Writes clean/, degraded/ and (for target speaker extraction) reference/
// WAVs plus manifest.jsonl under `out_dir`. Items draw from per-item seeds,
// so the output is byte-identical for a seed regardless of thread count.
// Returns the manifest path.
std::string SynthToyCorpus(TaskKind task, int count, std::uint64_t seed,
                           const std::string& out_dir, const CorpusOptions& options = {});

}  // namespace specflow
