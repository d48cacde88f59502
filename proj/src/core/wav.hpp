// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "spectral.hpp"

namespace specflow {

// 16-bit PCM mono RIFF/WAVE. Any positive sample rate is accepted and kept;
// multi-channel and non-16-bit files are rejected.
AudioSignal ReadWav(const std::string& path);

// Samples are clipped to [-1, 1] and rounded to 16-bit.
void WriteWav(const std::string& path, const AudioSignal& signal);

// The value a sample takes after a 16-bit write/read round trip.
double QuantizePcm16(double sample);

}  // namespace specflow
