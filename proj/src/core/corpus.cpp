// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <numbers>
#include <thread>
#include <vector>

#include "error.hpp"
#include "manifest.hpp"
#include "wav.hpp"

namespace specflow {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double Rms(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return std::sqrt(e / static_cast<double>(std::max<std::size_t>(1, x.size())));
}

std::string ItemId(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "item%05d", index);
  return buf;
}

// Reads back the quantized file contents so the manifest describes exactly
// what is on disk.
AudioSignal WriteQuantized(const AudioSignal& signal, const fs::path& path) {
  WriteWav(path.string(), signal);
  AudioSignal q = signal;
  for (double& v : q.samples) v = QuantizePcm16(v);
  return q;
}

ManifestRecord MakeItem(TaskKind task, int index, std::uint64_t seed, const fs::path& root,
                        const CorpusOptions& opt) {
  Rng rng(seed);
  const ToySpeaker speaker = RandomToySpeaker(rng);
  const double seconds = rng.Uniform(opt.min_seconds, opt.max_seconds);
  AudioSignal clean = SpeechLikeClip(speaker, seconds, rng);

  ManifestRecord r;
  r.id = ItemId(index);
  r.task = task;
  r.clean_path = "clean/" + r.id + ".wav";
  r.degraded_path = "degraded/" + r.id + ".wav";
  r.params = nlohmann::json::object();

  AudioSignal degraded;
  switch (task) {
    case TaskKind::kDenoise: {
      const double snr = rng.Uniform(opt.min_snr_db, opt.max_snr_db);
      AudioSignal noise;
      noise.sample_rate = clean.sample_rate;
      noise.samples.resize(clean.size());
      rng.FillNormal(noise.samples);
      clean = WriteQuantized(clean, root / r.clean_path);
      degraded = MixAtSnr(clean, noise, snr, rng);
      r.params["snr_db"] = snr;
      r.params["noise"] = "white";
      break;
    }
    case TaskKind::kBandwidthExtend: {
      static constexpr int kFactors[] = {2, 4, 8};
      const int factor = kFactors[rng.UniformInt(0, 2)];
      clean = WriteQuantized(clean, root / r.clean_path);
      degraded = BandwidthReduce(clean, factor);
      r.params["factor"] = factor;
      break;
    }
    case TaskKind::kCodecRestore: {
      const int bits = static_cast<int>(rng.UniformInt(4, 8));
      clean = WriteQuantized(clean, root / r.clean_path);
      degraded = CodecDegrade(clean, bits);
      r.params["bits"] = bits;
      break;
    }
    case TaskKind::kTargetSpeakerExtract: {
      ToySpeaker other = RandomToySpeaker(rng);
      while (std::abs(std::log(other.f0 / speaker.f0)) < std::log(1.2)) {
        other = RandomToySpeaker(rng);
      }
      const AudioSignal interferer = SpeechLikeClip(other, seconds, rng);
      const AudioSignal reference = SpeechLikeClip(speaker, rng.Uniform(3.0, 4.0), rng);
      r.reference_path = "reference/" + r.id + ".wav";
      WriteQuantized(reference, root / r.reference_path);
      const SpeakerMixture mix = MixTwoSpeakers(clean, interferer, rng);
      clean = WriteQuantized(mix.target, root / r.clean_path);
      degraded = mix.mixture;
      r.params["gain_db"] = mix.gain_db;
      r.params["target_f0"] = speaker.f0;
      r.params["interferer_f0"] = other.f0;
      break;
    }
  }
  WriteQuantized(degraded, root / r.degraded_path);
  return r;
}

}  // namespace

ToySpeaker RandomToySpeaker(Rng& rng) {
  ToySpeaker s;
  s.f0 = rng.Uniform(80.0, 300.0);
  const auto k = rng.UniformInt(3, 6);
  for (std::int64_t h = 1; h <= k; ++h) {
    s.harmonic_gains.push_back(rng.Uniform(0.3, 1.0) / static_cast<double>(h));
  }
  return s;
}

AudioSignal SpeechLikeClip(const ToySpeaker& speaker, double seconds, Rng& rng,
                           int sample_rate, double rms) {
  Require(seconds > 0.0 && sample_rate > 0 && rms > 0.0, ErrorCode::kInvalidArgument,
          "invalid clip parameters");
  Require(!speaker.harmonic_gains.empty(), ErrorCode::kInvalidArgument,
          "speaker has no harmonics");
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  const double fs = sample_rate;
  const double f0 = speaker.f0 * rng.Uniform(0.95, 1.05);
  const double vibrato_rate = rng.Uniform(3.0, 6.0);
  const double am_rate = rng.Uniform(2.0, 6.0);
  const double am_phase = rng.Uniform(0.0, kTwoPi);
  std::vector<double> phases(speaker.harmonic_gains.size());
  for (double& p : phases) p = rng.Uniform(0.0, kTwoPi);

  std::vector<double> voiced(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    phase += kTwoPi * f0 * (1.0 + 0.02 * std::sin(kTwoPi * vibrato_rate * t)) / fs;
    double v = 0.0;
    for (std::size_t h = 0; h < phases.size(); ++h) {
      v += speaker.harmonic_gains[h] * std::sin(static_cast<double>(h + 1) * phase + phases[h]);
    }
    voiced[i] = v * 0.5 * (1.0 + std::sin(kTwoPi * am_rate * t + am_phase));
  }
  const double voiced_rms = Rms(voiced);
  Require(voiced_rms > 0.0, ErrorCode::kNumerical, "degenerate voiced signal");

  // One-pole low-pass at about 4 kHz for the noise floor.
  std::vector<double> floor(n);
  const double alpha = 1.0 - std::exp(-kTwoPi * 4000.0 / fs);
  double state = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    state += alpha * (rng.Normal() - state);
    floor[i] = state;
  }
  const double floor_rms = Rms(floor);
  const double floor_gain = floor_rms > 0.0 ? std::pow(10.0, -30.0 / 20.0) / floor_rms : 0.0;

  AudioSignal out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = voiced[i] / voiced_rms + floor_gain * floor[i];
  }
  const double scale = rms / Rms(out.samples);
  for (double& v : out.samples) v *= scale;
  return out;
}

std::string SynthToyCorpus(TaskKind task, int count, std::uint64_t seed,
                           const std::string& out_dir, const CorpusOptions& options) {
  Require(count >= 0, ErrorCode::kInvalidArgument, "count must be non-negative");
  Require(options.min_seconds > 0.0 && options.max_seconds >= options.min_seconds,
          ErrorCode::kInvalidArgument, "invalid clip duration range");
  const fs::path root(out_dir);
  std::error_code ec;
  for (const char* sub : {"clean", "degraded", "reference"}) {
    if (std::string(sub) == "reference" && task != TaskKind::kTargetSpeakerExtract) continue;
    fs::create_directories(root / sub, ec);
    Require(!ec, ErrorCode::kIo, "cannot create directory " + (root / sub).string());
  }

  Rng seeder(seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
  for (auto& s : seeds) s = seeder.NextSeed();

  std::vector<ManifestRecord> records(seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        records[i] = MakeItem(task, static_cast<int>(i), seeds[i], root, options);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned threads = options.threads > 0 ? static_cast<unsigned>(options.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, std::max<std::size_t>(1, seeds.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  const std::string manifest = (root / "manifest.jsonl").string();
  WriteManifest(manifest, records);
  return manifest;
}

}  // namespace specflow
