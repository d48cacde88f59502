// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "tasks.hpp"

using namespace specflow;

namespace {

AudioSignal Tone(double hz, std::size_t n, double amp = 0.5) {
  AudioSignal s;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / 16000.0);
  return s;
}

AudioSignal Noise(std::size_t n, Rng& rng, double scale = 0.1) {
  AudioSignal s;
  s.samples.resize(n);
  rng.FillNormal(s.samples);
  for (double& v : s.samples) v *= scale;
  return s;
}

double Energy(const std::vector<double>& x, std::size_t skip = 0) {
  double e = 0.0;
  for (std::size_t i = skip; i + skip < x.size(); ++i) e += x[i] * x[i];
  return e;
}

// Energy of the one-sided spectrum between two frequencies, summed over frames.
double BandEnergy(const AudioSignal& x, double lo_hz, double hi_hz) {
  const StftParams p{512, 128};
  const ComplexSpectrogram s = Stft(x, p);
  double e = 0.0;
  for (int l = 0; l < s.frames; ++l) {
    for (int k = 0; k < p.bins(); ++k) {
      const double hz = k * 16000.0 / p.window_size;
      if (hz >= lo_hz && hz < hi_hz) e += std::norm(s.at(k, l));
    }
  }
  return e;
}

}  // namespace

TEST_CASE("task names") {
  CHECK(TaskName(TaskKind::kDenoise) == "denoise");
  CHECK(ParseTask("bwe") == TaskKind::kBandwidthExtend);
  CHECK(ParseTask("codec") == TaskKind::kCodecRestore);
  CHECK(ParseTask("tse") == TaskKind::kTargetSpeakerExtract);
  for (auto t : {TaskKind::kDenoise, TaskKind::kBandwidthExtend, TaskKind::kCodecRestore,
                 TaskKind::kTargetSpeakerExtract}) {
    CHECK(ParseTask(TaskName(t)) == t);
  }
  CHECK_THROWS_AS(ParseTask("dereverb"), Error);
}

TEST_CASE("mixing hits the requested SNR exactly") {
  Rng rng(1);
  const AudioSignal clean = Tone(220.0, 8000);
  for (double snr : {-5.0, 0.0, 7.3, 20.0}) {
    for (std::size_t noise_len : {3000u, 8000u, 20000u}) {
      AudioSignal scaled;
      const AudioSignal mix = MixAtSnr(clean, Noise(noise_len, rng), snr, rng, &scaled);
      REQUIRE(mix.size() == clean.size());
      CHECK(10 * std::log10(Energy(clean.samples) / Energy(scaled.samples)) == doctest::Approx(snr).epsilon(1e-12));
      for (std::size_t i = 0; i < mix.size(); i += 101) CHECK(mix.samples[i] == doctest::Approx(clean.samples[i] + scaled.samples[i]));
    }
  }
  CHECK_THROWS_AS(MixAtSnr(AudioSignal{std::vector<double>(10, 0.0)}, Noise(10, rng), 0.0, rng), Error);
}

TEST_CASE("bandwidth reduction keeps the passband and removes the upper band") {
  const std::size_t n = 16000;
  for (int factor : {2, 4, 8}) {
    const double nyq = 8000.0 / factor;
    const AudioSignal low = Tone(0.5 * nyq, n);
    const AudioSignal out = BandwidthReduce(low, factor);
    REQUIRE(out.size() == n);
    double worst = 0.0;
    for (std::size_t i = 2000; i < n - 2000; ++i) worst = std::max(worst, std::abs(out.samples[i] - low.samples[i]));
    CHECK(worst < 5e-3);
    const AudioSignal high = Tone(1.25 * nyq, n);
    const AudioSignal gone = BandwidthReduce(high, factor);
    CHECK(10 * std::log10(Energy(gone.samples, 2000) / Energy(high.samples, 2000)) < -60.0);
  }
  const AudioSignal x = Tone(440.0, 100);
  CHECK(BandwidthReduce(x, 1).samples == x.samples);
  CHECK_THROWS_AS(BandwidthReduce(x, 3), Error);
  AudioSignal other = x;
  other.sample_rate = 8000;
  CHECK_THROWS_AS(BandwidthReduce(other, 2), Error);
}

TEST_CASE("bandwidth reduction is idempotent on its passband") {
  Rng rng(4);
  const AudioSignal x = Noise(32000, rng);
  for (int factor : {2, 4}) {
    const double nyq = 8000.0 / factor;
    const AudioSignal once = BandwidthReduce(x, factor);
    const AudioSignal twice = BandwidthReduce(once, factor);
    const double pass_db = 10 * std::log10(BandEnergy(twice, 0, 0.8 * nyq) / BandEnergy(once, 0, 0.8 * nyq));
    const double total_db = 10 * std::log10(Energy(twice.samples) / Energy(once.samples));
    CHECK(std::abs(pass_db) < 1.0);
    CHECK(std::abs(total_db) < 1.0);
    CHECK(BandEnergy(once, 1.1 * nyq, 8000) < 1e-6 * BandEnergy(x, 1.1 * nyq, 8000));
  }
}

TEST_CASE("codec surrogate quantizes on the mu-law grid") {
  Rng rng(2);
  const AudioSignal x = Noise(4000, rng, 0.2);
  double prev = 0.0;
  for (int bits : {16, 8, 4, 2}) {
    const AudioSignal y = CodecDegrade(x, bits);
    REQUIRE(y.size() == x.size());
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err += (y.samples[i] - x.samples[i]) * (y.samples[i] - x.samples[i]);
    CHECK(err > prev);
    prev = err;
    // Quantization is a projection.
    CHECK(CodecDegrade(y, bits).samples == y.samples);
  }
  CHECK(std::sqrt(Energy(CodecDegrade(x, 16).samples) / Energy(x.samples)) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_THROWS_AS(CodecDegrade(x, 1), Error);
  CHECK_THROWS_AS(CodecDegrade(x, 17), Error);
}

TEST_CASE("two-speaker mixtures use the drawn relative gain") {
  Rng rng(3);
  const AudioSignal a = Tone(200.0, 9000), b = Tone(330.0, 7000, 0.1);
  const SpeakerMixture m = MixTwoSpeakers(a, b, 3.0);
  REQUIRE(m.mixture.size() == 7000);
  std::vector<double> interferer(7000);
  for (std::size_t i = 0; i < 7000; ++i) interferer[i] = m.mixture.samples[i] - m.target.samples[i];
  CHECK(10 * std::log10(Energy(m.target.samples) / Energy(interferer)) == doctest::Approx(3.0));
  for (int i = 0; i < 100; ++i) {
    const double g = MixTwoSpeakers(a, b, rng).gain_db;
    CHECK(g >= -5.0);
    CHECK(g <= 5.0);
  }
}

TEST_CASE("prompt prepending and trimming") {
  const TsePromptSpec prompt;  // 3 s at 16 kHz
  CHECK(prompt.Samples() == 48000);
  Rng rng(5);
  const AudioSignal ref = Noise(60000, rng), mix = Noise(12345, rng);
  const AudioSignal joined = PrependPrompt(ref, mix, prompt);
  REQUIRE(joined.size() == 48000 + 12345);
  CHECK(joined.samples[47999] == ref.samples[47999]);
  CHECK(joined.samples[48000] == mix.samples[0]);
  const AudioSignal trimmed = TrimTseOutput(joined, prompt, mix.size());
  CHECK(trimmed.samples == mix.samples);

  const AudioSignal short_ref = Noise(1000, rng);
  const AudioSignal padded = PrependPrompt(short_ref, mix, prompt);
  CHECK(padded.size() == 48000 + 12345);
  CHECK(padded.samples[999] == short_ref.samples[999]);
  CHECK(padded.samples[1000] == 0.0);
  CHECK_THROWS_AS(TrimTseOutput(mix, prompt, mix.size()), Error);
}

TEST_CASE("condition framing for each task") {
  Rng rng(6);
  const StftParams stft{510, 128};
  const AudioSignal mix = Noise(20000, rng), ref = Noise(50000, rng);
  const ConditionInput d = BuildCondition(TaskKind::kDenoise, mix, nullptr, stft, {});
  CHECK(d.features.frames == 1 + 20000 / 128);
  CHECK(d.features.channels == 512);
  const ConditionInput t = BuildCondition(TaskKind::kTargetSpeakerExtract, mix, &ref, stft, {});
  CHECK(t.features.frames == 1 + (48000 + 20000) / 128);
  CHECK_THROWS_AS(BuildCondition(TaskKind::kTargetSpeakerExtract, mix, nullptr, stft, {}), Error);
}
