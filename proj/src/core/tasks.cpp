// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "error.hpp"

namespace specflow {

namespace {

double Energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

// Zeroth-order modified Bessel function of the first kind.
double BesselI0(double x) {
  double sum = 1.0;
  double term = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// Linear-phase lowpass, cutoff in cycles/sample, odd length, unit DC gain.
std::vector<double> KaiserLowpass(double cutoff, double transition, double atten_db) {
  const double beta = 0.1102 * (atten_db - 8.7);
  int taps = static_cast<int>(std::ceil((atten_db - 7.95) / (14.36 * transition))) + 1;
  if (taps % 2 == 0) ++taps;
  const int half = taps / 2;
  std::vector<double> h(taps);
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    const int n = i - half;
    const double sinc = n == 0 ? 2.0 * cutoff
                               : std::sin(2.0 * std::numbers::pi * cutoff * n) /
                                     (std::numbers::pi * n);
    const double r = static_cast<double>(n) / half;
    const double w = BesselI0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / BesselI0(beta);
    h[i] = sinc * w;
    sum += h[i];
  }
  for (double& v : h) v /= sum;
  return h;
}

}  // namespace

std::string TaskName(TaskKind task) {
  switch (task) {
    case TaskKind::kDenoise: return "denoise";
    case TaskKind::kBandwidthExtend: return "bwe";
    case TaskKind::kCodecRestore: return "codec";
    case TaskKind::kTargetSpeakerExtract: return "tse";
  }
  return "unknown";
}

TaskKind ParseTask(const std::string& name) {
  if (name == "denoise") return TaskKind::kDenoise;
  if (name == "bwe" || name == "bandwidth-extend") return TaskKind::kBandwidthExtend;
  if (name == "codec" || name == "codec-restore") return TaskKind::kCodecRestore;
  if (name == "tse" || name == "target-speaker-extract") {
    return TaskKind::kTargetSpeakerExtract;
  }
  Fail(ErrorCode::kInvalidArgument, "unknown task: " + name);
}

std::size_t TsePromptSpec::Samples() const {
  return static_cast<std::size_t>(std::lround(prompt_seconds * sample_rate));
}

void TsePromptSpec::Validate() const {
  Require(prompt_seconds >= 0.0 && sample_rate > 0, ErrorCode::kInvalidArgument,
          "invalid prompt specification");
}

AudioSignal PrependPrompt(const AudioSignal& reference, const AudioSignal& mixture,
                          const TsePromptSpec& prompt) {
  prompt.Validate();
  Require(reference.sample_rate == mixture.sample_rate, ErrorCode::kInvalidArgument,
          "reference and mixture sample rates differ");
  Require(prompt.sample_rate == mixture.sample_rate, ErrorCode::kInvalidArgument,
          "prompt sample rate does not match the mixture");
  const std::size_t p = prompt.Samples();
  AudioSignal out;
  out.sample_rate = mixture.sample_rate;
  out.samples.assign(p + mixture.size(), 0.0);
  std::copy_n(reference.samples.begin(), std::min(p, reference.size()), out.samples.begin());
  std::copy(mixture.samples.begin(), mixture.samples.end(),
            out.samples.begin() + static_cast<std::ptrdiff_t>(p));
  return out;
}

ConditionInput BuildCondition(TaskKind task, const AudioSignal& degraded,
                              const AudioSignal* reference, const StftParams& stft,
                              const CompressionParams& compression,
                              const TsePromptSpec& prompt) {
  degraded.Validate();
  ConditionInput cond;
  if (task == TaskKind::kTargetSpeakerExtract) {
    Require(reference != nullptr, ErrorCode::kInvalidArgument,
            "target speaker extraction needs a reference recording");
    reference->Validate();
    cond.features = AnalyzeFeatures(PrependPrompt(*reference, degraded, prompt), stft,
                                    compression);
  } else {
    cond.features = AnalyzeFeatures(degraded, stft, compression);
  }
  return cond;
}

AudioSignal TrimTseOutput(const AudioSignal& generated, const TsePromptSpec& prompt,
                          std::size_t mixture_len) {
  prompt.Validate();
  const std::size_t p = prompt.Samples();
  Require(generated.size() >= p + mixture_len, ErrorCode::kInvalidArgument,
          "generated output (" + std::to_string(generated.size()) +
              " samples) is shorter than prompt plus mixture (" +
              std::to_string(p + mixture_len) + ")");
  AudioSignal out;
  out.sample_rate = generated.sample_rate;
  out.samples.assign(generated.samples.begin() + static_cast<std::ptrdiff_t>(p),
                     generated.samples.begin() + static_cast<std::ptrdiff_t>(p + mixture_len));
  return out;
}

AudioSignal MixAtSnr(const AudioSignal& clean, const AudioSignal& noise, double snr_db,
                     Rng& rng, AudioSignal* scaled_noise) {
  Require(clean.sample_rate == noise.sample_rate, ErrorCode::kInvalidArgument,
          "clean and noise sample rates differ");
  Require(!clean.samples.empty() && !noise.samples.empty(), ErrorCode::kInvalidArgument,
          "empty input to MixAtSnr");
  const std::size_t n = clean.size();
  std::vector<double> fitted(n);
  const std::size_t offset =
      noise.size() > n ? static_cast<std::size_t>(rng.UniformInt(0, static_cast<std::int64_t>(noise.size() - n)))
                       : static_cast<std::size_t>(rng.UniformInt(0, static_cast<std::int64_t>(noise.size()) - 1));
  for (std::size_t i = 0; i < n; ++i) fitted[i] = noise.samples[(offset + i) % noise.size()];

  const double clean_energy = Energy(clean.samples);
  const double noise_energy = Energy(fitted);
  Require(clean_energy > 0.0, ErrorCode::kInvalidArgument, "clean signal has zero energy");
  Require(noise_energy > 0.0, ErrorCode::kInvalidArgument, "noise has zero energy");
  const double gain = std::sqrt(clean_energy / (noise_energy * std::pow(10.0, snr_db / 10.0)));

  AudioSignal out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    fitted[i] *= gain;
    out.samples[i] = clean.samples[i] + fitted[i];
  }
  if (scaled_noise) {
    scaled_noise->sample_rate = clean.sample_rate;
    scaled_noise->samples = std::move(fitted);
  }
  return out;
}

AudioSignal BandwidthReduce(const AudioSignal& signal, int factor) {
  Require(factor == 1 || factor == 2 || factor == 4 || factor == 8,
          ErrorCode::kInvalidArgument,
          "unsupported down-scaling factor " + std::to_string(factor));
  Require(signal.sample_rate == 16000, ErrorCode::kInvalidArgument,
          "bandwidth reduction expects 16 kHz input");
  if (factor == 1) return signal;

  const double target_nyquist = 0.5 / factor;  // cycles/sample at the input rate
  const std::vector<double> h =
      KaiserLowpass(0.9 * target_nyquist, 0.2 * target_nyquist, 80.0);
  const auto half = static_cast<std::ptrdiff_t>(h.size() / 2);
  const auto len = static_cast<std::ptrdiff_t>(signal.size());
  const std::ptrdiff_t low_len = (len + factor - 1) / factor;

  // Anti-aliased decimation, evaluated only at the kept samples.
  std::vector<double> low(static_cast<std::size_t>(low_len), 0.0);
  for (std::ptrdiff_t m = 0; m < low_len; ++m) {
    const std::ptrdiff_t center = m * factor;
    double acc = 0.0;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, center - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len - 1, center + half);
    for (std::ptrdiff_t n = lo; n <= hi; ++n) acc += h[center - n + half] * signal.samples[n];
    low[m] = acc;
  }

  // Interpolation: zero insertion followed by the same filter at gain `factor`.
  AudioSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples.assign(signal.size(), 0.0);
  for (std::ptrdiff_t n = 0; n < len; ++n) {
    const std::ptrdiff_t m_lo = std::max<std::ptrdiff_t>(0, (n - half + factor - 1) / factor);
    const std::ptrdiff_t m_hi = std::min<std::ptrdiff_t>(low_len - 1, (n + half) / factor);
    double acc = 0.0;
    for (std::ptrdiff_t m = m_lo; m <= m_hi; ++m) acc += h[n - m * factor + half] * low[m];
    out.samples[n] = factor * acc;
  }
  return out;
}

AudioSignal CodecDegrade(const AudioSignal& signal, int bits_per_sample) {
  Require(bits_per_sample >= 2 && bits_per_sample <= 16, ErrorCode::kInvalidArgument,
          "bits per sample must lie in [2, 16]");
  constexpr double kMu = 255.0;
  const double levels = std::exp2(bits_per_sample - 1) - 1.0;
  const double log_mu = std::log1p(kMu);
  AudioSignal out = signal;
  for (double& s : out.samples) {
    const double x = std::clamp(s, -1.0, 1.0);
    const double companded = std::copysign(std::log1p(kMu * std::abs(x)) / log_mu, x);
    const double q = std::round(companded * levels) / levels;
    s = std::copysign(std::expm1(std::abs(q) * log_mu) / kMu, q);
  }
  return out;
}

SpeakerMixture MixTwoSpeakers(const AudioSignal& a, const AudioSignal& b, double gain_db) {
  Require(a.sample_rate == b.sample_rate, ErrorCode::kInvalidArgument,
          "speaker sample rates differ");
  Require(!a.samples.empty() && !b.samples.empty(), ErrorCode::kInvalidArgument,
          "zero-length speaker signal");
  const std::size_t n = std::min(a.size(), b.size());
  SpeakerMixture out;
  out.gain_db = gain_db;
  out.target.sample_rate = a.sample_rate;
  out.target.samples.assign(a.samples.begin(), a.samples.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<double> interferer(b.samples.begin(), b.samples.begin() + static_cast<std::ptrdiff_t>(n));
  const double ea = Energy(out.target.samples);
  const double eb = Energy(interferer);
  const double g = eb > 0.0 && ea > 0.0 ? std::sqrt(ea / eb * std::pow(10.0, -gain_db / 10.0)) : 1.0;
  out.mixture.sample_rate = a.sample_rate;
  out.mixture.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.mixture.samples[i] = out.target.samples[i] + g * interferer[i];
  }
  return out;
}

SpeakerMixture MixTwoSpeakers(const AudioSignal& a, const AudioSignal& b, Rng& rng) {
  return MixTwoSpeakers(a, b, rng.Uniform(-5.0, 5.0));
}

}  // namespace specflow
