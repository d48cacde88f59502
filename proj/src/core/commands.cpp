// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "error.hpp"
#include "sampler.hpp"
#include "wav.hpp"

namespace specflow {

namespace {

TrainState MakeState(const RunConfig& config, const std::string& init,
                     const std::string& resume) {
  Require(init.empty() || resume.empty(), ErrorCode::kInvalidArgument,
          "init and resume checkpoints are mutually exclusive");
  if (!resume.empty()) return LoadCheckpoint(resume, config.model);
  if (!init.empty()) {
    TrainState loaded = LoadCheckpoint(init, config.model);
    Rng seeder(config.train.seed);
    return TrainState(std::move(loaded.model), seeder.NextSeed());
  }
  return InitTrainState(config.model, config.train);
}

RunConfig Finalized(RunConfig config) {
  config.Finalize();
  return config;
}

template <typename Fn>
void ParallelFor(std::size_t count, int threads, Fn&& fn) {
  unsigned n = threads > 0 ? static_cast<unsigned>(threads)
                           : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(1, count)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

Trainer::Trainer(RunConfig config, const std::string& manifest_path,
                 const std::string& init_checkpoint, const std::string& resume_checkpoint)
    : config_(Finalized(std::move(config))),
      state_(MakeState(config_, init_checkpoint, resume_checkpoint)) {
  const ManifestLoadResult loaded = LoadManifest(manifest_path, true);
  Require(!loaded.records.empty(), ErrorCode::kInvalidArgument,
          "manifest has no records: " + manifest_path);
  const bool pretrain = config_.train.mode == TrainMode::kPretrain;
  std::vector<const ManifestRecord*> used;
  for (const auto& r : loaded.records) {
    if (pretrain || r.task == config_.train.task) used.push_back(&r);
  }
  Require(!used.empty(), ErrorCode::kInvalidArgument,
          "manifest has no records for task " + TaskName(config_.train.task));

  if (pretrain) {
    clean_.resize(used.size());
  } else {
    examples_.resize(used.size());
  }
  ParallelFor(used.size(), 0, [&](std::size_t i) {
    const ManifestRecord& r = *used[i];
    const AudioSignal clean = ReadWav(r.clean_path);
    if (pretrain) {
      clean_[i] = AnalyzeFeatures(clean, config_.stft, config_.compression);
      return;
    }
    const AudioSignal degraded = ReadWav(r.degraded_path);
    AudioSignal reference;
    if (!r.reference_path.empty()) reference = ReadWav(r.reference_path);
    examples_[i] = MakeFinetuneExample(r.task, degraded, clean,
                                       r.reference_path.empty() ? nullptr : &reference,
                                       config_.stft, config_.compression, config_.prompt);
  });
}

std::size_t Trainer::utterances() const {
  return config_.train.mode == TrainMode::kPretrain ? clean_.size() : examples_.size();
}

void Trainer::Run(int until_step, const LogSink& sink) {
  const double fps = config_.FrameRate(config_.prompt.sample_rate);
  if (config_.train.mode == TrainMode::kPretrain) {
    TrainPretrain(state_, clean_, fps, config_.train, config_.flow, until_step, sink);
  } else {
    TrainFinetune(state_, examples_, fps, config_.train, config_.flow, until_step, sink);
  }
}

VectorFieldModel LoadModel(const std::string& checkpoint, const RunConfig& config) {
  TrainState state = LoadCheckpoint(checkpoint);
  Require(state.model.config.feature_channels == config.stft.feature_channels(),
          ErrorCode::kIncompatible,
          "checkpoint feature width " + std::to_string(state.model.config.feature_channels) +
              " does not match the configured STFT (" +
              std::to_string(config.stft.feature_channels()) + ")");
  return std::move(state.model);
}

AudioSignal Restore(const VectorFieldModel& model, const RunConfig& config, TaskKind task,
                    const AudioSignal& degraded, const AudioSignal* reference,
                    std::uint64_t seed) {
  config.Validate();
  Rng rng(seed);
  return Generate(model, task, degraded, reference, config.Generation(), rng);
}

MetricsReport EvaluateRecords(const std::vector<ManifestRecord>& records,
                              const RunConfig& config, const VectorFieldModel* model,
                              std::uint64_t seed, int threads) {
  config.Validate();
  Rng seeder(seed);
  std::vector<std::uint64_t> seeds(records.size());
  for (auto& s : seeds) s = seeder.NextSeed();
  std::vector<UtteranceScore> scores(records.size());
  ParallelFor(records.size(), threads, [&](std::size_t i) {
    const ManifestRecord& r = records[i];
    const AudioSignal clean = ReadWav(r.clean_path);
    const AudioSignal degraded = ReadWav(r.degraded_path);
    AudioSignal estimate;
    if (!r.estimate_path.empty()) {
      estimate = ReadWav(r.estimate_path);
    } else {
      Require(model != nullptr, ErrorCode::kInvalidArgument,
              "record " + r.id + " has no estimate_path and no model was given");
      AudioSignal reference;
      if (!r.reference_path.empty()) reference = ReadWav(r.reference_path);
      estimate = Restore(*model, config, r.task, degraded,
                         r.reference_path.empty() ? nullptr : &reference, seeds[i]);
    }
    Require(estimate.size() == clean.size() && degraded.size() == clean.size(),
            ErrorCode::kShapeMismatch, "record " + r.id + ": signal lengths differ");
    UtteranceScore s;
    s.id = r.id;
    s.si_sdr = SiSdr(estimate, clean);
    s.si_sdr_improvement = SiSdrImprovement(estimate, degraded, clean);
    s.lsd = LogSpectralDistance(estimate, clean, config.stft);
    scores[i] = std::move(s);
  });
  MetricsReport report;
  for (auto& s : scores) report.Add(std::move(s));
  report.Finalize();
  return report;
}

}  // namespace specflow
