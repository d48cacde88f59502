// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "error.hpp"

namespace specflow {

namespace {

// FFTW planning is not thread-safe; execution with new arrays is. Plans are
// created once per size under a lock and executed on thread-local buffers.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    forward_ = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(n, out, in, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
  ~RealFft() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  static const RealFft& Get(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<RealFft>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<RealFft>(n);
    return *slot;
  }

  void Forward(double* in, fftw_complex* out) const {
    fftw_execute_dft_r2c(forward_, in, out);
  }
  // Unnormalized: the caller divides by n.
  void Inverse(fftw_complex* in, double* out) const {
    fftw_execute_dft_c2r(inverse_, in, out);
  }
  int size() const { return n_; }

 private:
  int n_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

struct FftBuffers {
  int n = 0;
  double* real = nullptr;
  fftw_complex* spec = nullptr;

  void Resize(int size) {
    if (size == n) return;
    Release();
    n = size;
    real = fftw_alloc_real(size);
    spec = fftw_alloc_complex(size / 2 + 1);
  }
  void Release() {
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
    real = nullptr;
    spec = nullptr;
  }
  ~FftBuffers() { Release(); }
};

FftBuffers& ThreadBuffers(int n) {
  thread_local FftBuffers buffers;
  buffers.Resize(n);
  return buffers;
}

// Mirror index into [0, n) without repeating the edge sample.
std::size_t ReflectIndex(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

void AudioSignal::Validate() const {
  Require(sample_rate > 0, ErrorCode::kInvalidArgument,
          "sample rate must be positive");
  for (double s : samples) {
    Require(std::isfinite(s), ErrorCode::kNumerical,
            "audio contains non-finite samples");
  }
}

int StftParams::NumFrames(std::size_t num_samples) const {
  return 1 + static_cast<int>(num_samples / static_cast<std::size_t>(hop_size));
}

std::size_t StftParams::MaxSamples(int frames) const {
  return static_cast<std::size_t>(frames - 1) * hop_size + window_size -
         window_size / 2;
}

void StftParams::Validate() const {
  Require(window_size >= 2, ErrorCode::kInvalidArgument,
          "window size must be at least 2");
  Require(hop_size > 0 && hop_size <= window_size,
          ErrorCode::kInvalidArgument, "hop size must be in (0, window size]");
  // Hann overlap-add needs at least two frames covering every sample.
  Require(2 * hop_size <= window_size, ErrorCode::kInvalidArgument,
          "hop size must not exceed half the window for Hann reconstruction");
}

std::vector<double> MakeWindow(const StftParams& params) {
  std::vector<double> w(params.window_size);
  const double n = params.window_size;
  for (int i = 0; i < params.window_size; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

void CompressionParams::Validate() const {
  Require(exponent > 0 && scale > 0, ErrorCode::kInvalidArgument,
          "compression exponent and scale must be positive");
}

FeatureGrid FeatureGrid::Slice(int first, int count) const {
  Require(first >= 0 && count >= 0 && first + count <= frames,
          ErrorCode::kInvalidArgument, "frame slice out of range");
  FeatureGrid out(channels, count);
  out.layout = layout;
  std::copy(values.begin() + static_cast<std::ptrdiff_t>(first) * channels,
            values.begin() + static_cast<std::ptrdiff_t>(first + count) * channels,
            out.values.begin());
  return out;
}

ComplexSpectrogram Stft(const AudioSignal& signal, const StftParams& params) {
  params.Validate();
  Require(!signal.samples.empty(), ErrorCode::kInvalidArgument,
          "stft of an empty signal");
  signal.Validate();
  const int n_fft = params.window_size;
  const int bins = params.bins();
  const int pad = n_fft / 2;
  const std::size_t len = signal.samples.size();
  const std::vector<double> window = MakeWindow(params);

  ComplexSpectrogram spec;
  spec.params = params;
  spec.frames = params.NumFrames(len);
  spec.data.assign(static_cast<std::size_t>(spec.frames) * bins, Complex{});

  const RealFft& fft = RealFft::Get(n_fft);
  FftBuffers& buf = ThreadBuffers(n_fft);
  for (int l = 0; l < spec.frames; ++l) {
    const std::ptrdiff_t start =
        static_cast<std::ptrdiff_t>(l) * params.hop_size - pad;
    for (int i = 0; i < n_fft; ++i) {
      buf.real[i] = signal.samples[ReflectIndex(start + i, len)] * window[i];
    }
    fft.Forward(buf.real, buf.spec);
    for (int k = 0; k < bins; ++k) {
      spec.at(k, l) = Complex(buf.spec[k][0], buf.spec[k][1]);
    }
  }
  return spec;
}

AudioSignal Istft(const ComplexSpectrogram& spec, std::size_t length,
                  int sample_rate) {
  const StftParams& params = spec.params;
  params.Validate();
  Require(spec.frames > 0 &&
              spec.data.size() == static_cast<std::size_t>(spec.frames) * spec.bins(),
          ErrorCode::kShapeMismatch, "istft: malformed spectrogram");
  Require(length <= params.MaxSamples(spec.frames), ErrorCode::kInvalidArgument,
          "istft: requested length exceeds what the frames cover");
  for (const Complex& z : spec.data) {
    Require(std::isfinite(z.real()) && std::isfinite(z.imag()),
            ErrorCode::kNumerical, "istft: non-finite coefficient");
  }
  const int n_fft = params.window_size;
  const int bins = params.bins();
  const int pad = n_fft / 2;
  const std::vector<double> window = MakeWindow(params);
  const std::size_t padded =
      static_cast<std::size_t>(spec.frames - 1) * params.hop_size + n_fft;
  std::vector<double> acc(padded, 0.0);
  std::vector<double> norm(padded, 0.0);

  const RealFft& fft = RealFft::Get(n_fft);
  FftBuffers& buf = ThreadBuffers(n_fft);
  for (int l = 0; l < spec.frames; ++l) {
    for (int k = 0; k < bins; ++k) {
      buf.spec[k][0] = spec.at(k, l).real();
      buf.spec[k][1] = spec.at(k, l).imag();
    }
    // The c2r transform ignores the imaginary parts of DC and Nyquist.
    fft.Inverse(buf.spec, buf.real);
    const std::size_t start = static_cast<std::size_t>(l) * params.hop_size;
    for (int i = 0; i < n_fft; ++i) {
      acc[start + i] += buf.real[i] / n_fft * window[i];
      norm[start + i] += window[i] * window[i];
    }
  }

  AudioSignal out;
  out.sample_rate = sample_rate;
  out.samples.assign(length, 0.0);
  for (std::size_t n = 0; n < length; ++n) {
    const double w = norm[n + pad];
    out.samples[n] = w > 1e-11 ? acc[n + pad] / w : 0.0;
  }
  return out;
}

ComplexSpectrogram Compress(const ComplexSpectrogram& spec,
                            const CompressionParams& cp) {
  cp.Validate();
  ComplexSpectrogram out = spec;
  for (Complex& z : out.data) {
    const double mag = std::abs(z);
    if (mag == 0.0) continue;
    z *= cp.scale * std::pow(mag, cp.exponent) / mag;
  }
  return out;
}

ComplexSpectrogram Decompress(const ComplexSpectrogram& spec,
                              const CompressionParams& cp) {
  cp.Validate();
  ComplexSpectrogram out = spec;
  for (Complex& z : out.data) {
    const double mag = std::abs(z);
    if (mag == 0.0) continue;
    z *= std::pow(mag / cp.scale, 1.0 / cp.exponent) / mag;
  }
  return out;
}

FeatureGrid PackFeatures(const ComplexSpectrogram& spec) {
  const int bins = spec.bins();
  FeatureGrid grid(2 * bins, spec.frames);
  for (int l = 0; l < spec.frames; ++l) {
    for (int k = 0; k < bins; ++k) {
      const Complex z = spec.at(k, l);
      Require(std::isfinite(z.real()) && std::isfinite(z.imag()),
              ErrorCode::kNumerical, "pack: non-finite coefficient");
      grid.at(k, l) = z.real();
      grid.at(bins + k, l) = z.imag();
    }
  }
  return grid;
}

ComplexSpectrogram UnpackFeatures(const FeatureGrid& grid,
                                  const StftParams& params) {
  Require(grid.channels % 2 == 0, ErrorCode::kShapeMismatch,
          "unpack: odd channel count");
  Require(grid.channels == params.feature_channels(), ErrorCode::kShapeMismatch,
          "unpack: channel count does not match the STFT bin count");
  Require(grid.values.size() == static_cast<std::size_t>(grid.channels) * grid.frames,
          ErrorCode::kShapeMismatch, "unpack: malformed grid");
  const int bins = grid.channels / 2;
  ComplexSpectrogram spec;
  spec.params = params;
  spec.frames = grid.frames;
  spec.data.resize(static_cast<std::size_t>(bins) * grid.frames);
  for (int l = 0; l < grid.frames; ++l) {
    for (int k = 0; k < bins; ++k) {
      spec.at(k, l) = Complex(grid.at(k, l), grid.at(bins + k, l));
    }
  }
  return spec;
}

FeatureGrid AnalyzeFeatures(const AudioSignal& signal, const StftParams& params,
                            const CompressionParams& cp) {
  return PackFeatures(Compress(Stft(signal, params), cp));
}

AudioSignal SynthesizeFeatures(const FeatureGrid& grid, const StftParams& params,
                               const CompressionParams& cp, std::size_t length,
                               int sample_rate) {
  return Istft(Decompress(UnpackFeatures(grid, params), cp), length, sample_rate);
}

}  // namespace specflow
