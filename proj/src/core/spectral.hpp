// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Complex STFT analysis/synthesis, power-law magnitude compression and the
// packing between complex spectrograms and real-valued feature grids.

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace specflow {

struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  // Throws on a non-positive rate or non-finite samples.
  void Validate() const;
};

enum class WindowKind { kHann };

struct StftParams {
  int window_size = 510;
  int hop_size = 128;
  WindowKind window = WindowKind::kHann;

  // One-sided spectrum size, window_size / 2 + 1.
  int bins() const { return window_size / 2 + 1; }
  int feature_channels() const { return 2 * bins(); }
  // Frames produced for a signal of `num_samples`: 1 + floor(num_samples / hop).
  // Frames are centred on multiples of hop; the signal is reflect-padded by
  // window_size / 2 on both sides.
  int NumFrames(std::size_t num_samples) const;
  // Largest signal length that `frames` frames can synthesize.
  std::size_t MaxSamples(int frames) const;
  void Validate() const;
};

// Periodic Hann analysis window (also used for synthesis).
std::vector<double> MakeWindow(const StftParams& params);

using Complex = std::complex<double>;

struct ComplexSpectrogram {
  StftParams params;
  int frames = 0;
  // Frame-major: coefficient (bin k, frame l) lives at l * bins + k.
  std::vector<Complex> data;

  int bins() const { return params.bins(); }
  Complex& at(int bin, int frame) { return data[frame * bins() + bin]; }
  const Complex& at(int bin, int frame) const {
    return data[frame * bins() + bin];
  }
};

struct CompressionParams {
  double exponent = 0.5;  // a
  double scale = 0.33;    // b
  void Validate() const;
};

enum class ChannelLayout { kRealThenImag };

// Real-valued grid of `channels` x `frames`. Storage is frame-major so each
// frame's channel vector is contiguous (a row-major frames x channels matrix).
struct FeatureGrid {
  int channels = 0;
  int frames = 0;
  ChannelLayout layout = ChannelLayout::kRealThenImag;
  std::vector<double> values;

  FeatureGrid() = default;
  FeatureGrid(int channels, int frames)
      : channels(channels),
        frames(frames),
        values(static_cast<std::size_t>(channels) * frames, 0.0) {}

  double& at(int channel, int frame) { return values[frame * channels + channel]; }
  double at(int channel, int frame) const {
    return values[frame * channels + channel];
  }
  std::span<double> frame(int l) {
    return {values.data() + static_cast<std::size_t>(l) * channels,
            static_cast<std::size_t>(channels)};
  }
  std::span<const double> frame(int l) const {
    return {values.data() + static_cast<std::size_t>(l) * channels,
            static_cast<std::size_t>(channels)};
  }
  std::size_t size() const { return values.size(); }
  bool SameShape(const FeatureGrid& other) const {
    return channels == other.channels && frames == other.frames;
  }
  // Copy of frames [first, first + count).
  FeatureGrid Slice(int first, int count) const;
};

ComplexSpectrogram Stft(const AudioSignal& signal, const StftParams& params);
AudioSignal Istft(const ComplexSpectrogram& spec, std::size_t length,
                  int sample_rate = 16000);

ComplexSpectrogram Compress(const ComplexSpectrogram& spec,
                            const CompressionParams& cp);
ComplexSpectrogram Decompress(const ComplexSpectrogram& spec,
                              const CompressionParams& cp);

FeatureGrid PackFeatures(const ComplexSpectrogram& spec);
ComplexSpectrogram UnpackFeatures(const FeatureGrid& grid,
                                  const StftParams& params);

// stft -> compress -> pack.
FeatureGrid AnalyzeFeatures(const AudioSignal& signal, const StftParams& params,
                            const CompressionParams& cp);
// unpack -> decompress -> istft.
AudioSignal SynthesizeFeatures(const FeatureGrid& grid, const StftParams& params,
                               const CompressionParams& cp, std::size_t length,
                               int sample_rate);

}  // namespace specflow
