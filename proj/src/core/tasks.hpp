// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Task conditions and the degradations used to synthesize restoration pairs.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include "masking.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace specflow {

enum class TaskKind { kDenoise, kBandwidthExtend, kCodecRestore, kTargetSpeakerExtract };

std::string TaskName(TaskKind task);
// Accepts the names produced by TaskName ("denoise", "bwe", "codec", "tse")
// and the long forms ("bandwidth-extend", "codec-restore",
// "target-speaker-extract").
TaskKind ParseTask(const std::string& name);

struct TsePromptSpec {
  double prompt_seconds = 3.0;
  int sample_rate = 16000;

  std::size_t Samples() const;
  void Validate() const;
};

// Denoise, bandwidth extension and codec restoration condition on the
// features of the degraded signal. Target speaker extraction prepends the
// first prompt_seconds of the reference (zero-padded when shorter) to the
// mixture with no gap and conditions on the features of the concatenation.
ConditionInput BuildCondition(TaskKind task, const AudioSignal& degraded,
                              const AudioSignal* reference, const StftParams& stft,
                              const CompressionParams& compression,
                              const TsePromptSpec& prompt = {});

// Prompt followed by the mixture, in the time domain.
AudioSignal PrependPrompt(const AudioSignal& reference, const AudioSignal& mixture,
                          const TsePromptSpec& prompt);

// Drops the prompt region and keeps exactly `mixture_len` samples.
AudioSignal TrimTseOutput(const AudioSignal& generated, const TsePromptSpec& prompt,
                          std::size_t mixture_len);

// clean + g * noise with g chosen for the requested SNR. The noise is cropped
// at a random offset, or looped, to the clean length. When `scaled_noise` is
// given it receives g * noise.
AudioSignal MixAtSnr(const AudioSignal& clean, const AudioSignal& noise, double snr_db,
                     Rng& rng, AudioSignal* scaled_noise = nullptr);

// Decimate by `factor` and resample back to the input rate with a Kaiser
// windowed-sinc (linear-phase) polyphase filter, cutoff at 0.9 of the
// decimated Nyquist. Factor 1 is the identity.
AudioSignal BandwidthReduce(const AudioSignal& signal, int factor);

// Surrogate coding degradation: mu-law (mu = 255) companding and uniform
// mid-tread quantization at `bits_per_sample`.
AudioSignal CodecDegrade(const AudioSignal& signal, int bits_per_sample);

struct SpeakerMixture {
  AudioSignal mixture;
  AudioSignal target;
  double gain_db = 0.0;
};

// Crops both to the shorter length and adds b scaled so that a sits
// `gain_db` above it.
SpeakerMixture MixTwoSpeakers(const AudioSignal& a, const AudioSignal& b, double gain_db);
// Relative gain drawn uniformly in [-5, 5] dB.
SpeakerMixture MixTwoSpeakers(const AudioSignal& a, const AudioSignal& b, Rng& rng);

}  // namespace specflow
