// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "config.hpp"
#include "manifest.hpp"
#include "metrics.hpp"
#include "training.hpp"

namespace specflow {

// Owns the training data and state of a pretraining or finetuning run.
// Pretraining reads the clean side of every manifest record; finetuning
// builds (condition, target) pairs for records of the configured task.
class Trainer {
 public:
  // `init_checkpoint` seeds the parameters only (pretrained model for
  // finetuning); `resume_checkpoint` restores the full state. Both may be
  // empty.
  Trainer(RunConfig config, const std::string& manifest_path,
          const std::string& init_checkpoint = "", const std::string& resume_checkpoint = "");

  // Trains until `until_step` updates are done (total_steps when <= 0).
  void Run(int until_step, const LogSink& sink);
  void Save(const std::string& path) const { SaveCheckpoint(state_, path); }

  const TrainState& state() const { return state_; }
  const RunConfig& config() const { return config_; }
  std::size_t utterances() const;

 private:
  RunConfig config_;
  std::vector<FeatureGrid> clean_;
  std::vector<FinetuneExample> examples_;
  TrainState state_;
};

// Restores a model for inference; the STFT of `config` must match the
// checkpoint's feature width.
VectorFieldModel LoadModel(const std::string& checkpoint, const RunConfig& config);

AudioSignal Restore(const VectorFieldModel& model, const RunConfig& config, TaskKind task,
                    const AudioSignal& degraded, const AudioSignal* reference,
                    std::uint64_t seed);

// Scores every record against its clean signal. The estimate is the
// record's estimate_path when present, otherwise generated by `model`
// (required then). Records run in parallel with per-record seeds.
MetricsReport EvaluateRecords(const std::vector<ManifestRecord>& records,
                              const RunConfig& config, const VectorFieldModel* model,
                              std::uint64_t seed, int threads = 0);

}  // namespace specflow
