// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Pretraining and finetuning loops: learning-rate schedule, Adam updates,
// duration-based batching, checkpoints and loss logging.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowpath.hpp"
#include "masking.hpp"
#include "rng.hpp"
#include "tasks.hpp"
#include "vectorfield.hpp"

namespace specflow {

enum class TrainMode { kPretrain, kFinetune, kScratch };
enum class LossSupport { kAllFrames, kMaskedOnly };

std::string TrainModeName(TrainMode mode);
TrainMode ParseTrainMode(const std::string& name);
std::string LossSupportName(LossSupport support);
LossSupport ParseLossSupport(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::kPretrain;
  double peak_lr = 5e-5;
  double final_lr = 1e-5;
  int warmup_steps = 5000;
  int total_steps = 600000;
  double batch_seconds = 131.0;
  // Training segments are cropped to at most this many seconds; 0 keeps the
  // shortest utterance length of the batch.
  double segment_seconds = 0.0;
  std::uint64_t seed = 0;
  double mask_ratio = 0.7;
  int mask_min_span = 10;
  double condition_dropout = 0.1;
  TaskKind task = TaskKind::kDenoise;
  LossSupport loss_support = LossSupport::kAllFrames;
  // Global gradient-norm clip; <= 0 disables clipping.
  double grad_clip = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // Schedule defaults per mode: pretraining 5e-5 -> 1e-5, finetuning
  // 2e-5 -> 0, training from scratch 1e-4 -> 0, all with 5k warmup steps.
  static TrainConfig Defaults(TrainMode mode);
  void Validate() const;
};

// Linear warmup from 0 to peak over warmup_steps, then cosine annealing to
// final_lr at total_steps.
double LrSchedule(int step, const TrainConfig& cfg);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

struct LossStats {
  double last = 0.0;
  double ema = 0.0;
  double sum = 0.0;
  std::int64_t count = 0;
  void Add(double loss);
};

struct TrainState {
  int step = 0;  // completed updates
  VectorFieldModel model;
  AdamState adam;
  Rng rng;
  LossStats loss;

  explicit TrainState(VectorFieldModel m, std::uint64_t seed = 0);
};

// Fresh state: parameters initialised from a generator seeded with cfg.seed.
TrainState InitTrainState(const ModelConfig& model, const TrainConfig& cfg);

struct StepResult {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
  int null_conditions = 0;
};

// One Adam update at learning rate LrSchedule(step + 1). `gradient` is the
// mean gradient over the batch; it is clipped in place.
double ApplyAdam(TrainState& state, std::vector<double>& gradient, const TrainConfig& cfg,
                 double lr);

// Masked-condition pretraining on clean features: per item sample a span
// mask, zero the masked frames, drop the condition with the configured
// probability, draw (t, x0) and regress the path derivative.
StepResult PretrainStep(TrainState& state, std::span<const FeatureGrid> batch,
                        const TrainConfig& cfg, const FlowPathConfig& flow);

struct FinetuneExample {
  ConditionInput condition;
  FeatureGrid clean;
};

// Builds the condition for `task` and the matching clean target features.
// For target speaker extraction the target is the prompt followed by the
// clean speech, aligned with the prompt-prepended mixture.
FinetuneExample MakeFinetuneExample(TaskKind task, const AudioSignal& degraded,
                                    const AudioSignal& clean, const AudioSignal* reference,
                                    const StftParams& stft, const CompressionParams& cp,
                                    const TsePromptSpec& prompt = {});

// Conditions are always fed; no dropout.
StepResult FinetuneStep(TrainState& state, std::span<const FinetuneExample> batch,
                        const TrainConfig& cfg, const FlowPathConfig& flow);

// Picks batches of equal-length segments whose total duration fills
// batch_seconds. Utterances are bucketed by length; each batch draws from
// one bucket and crops to the shortest member (capped by segment_seconds).
class DurationBatcher {
 public:
  struct Item {
    std::size_t index = 0;
    int start = 0;
    int frames = 0;
  };

  DurationBatcher(std::vector<int> frame_counts, double frames_per_second,
                  double batch_seconds, double segment_seconds);
  std::vector<Item> Next(Rng& rng) const;

 private:
  std::vector<int> frame_counts_;
  std::vector<std::vector<std::size_t>> buckets_;
  double frames_per_second_;
  double batch_seconds_;
  double segment_seconds_;
};

struct TrainLogRecord {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

std::string FormatLogRecord(const TrainLogRecord& record);

// Runs updates until state.step reaches `until_step` (or total_steps when 0)
// over the given utterances. Pretraining uses `clean` only; finetuning uses
// `examples`.
using LogSink = std::function<void(const TrainLogRecord&)>;
void TrainPretrain(TrainState& state, const std::vector<FeatureGrid>& clean,
                   double frames_per_second, const TrainConfig& cfg,
                   const FlowPathConfig& flow, int until_step, const LogSink& sink);
void TrainFinetune(TrainState& state, const std::vector<FinetuneExample>& examples,
                   double frames_per_second, const TrainConfig& cfg,
                   const FlowPathConfig& flow, int until_step, const LogSink& sink);

// Binary checkpoint: versioned header, model configuration, named parameter
// segments, step counter, optimizer moments and generator state.
void SaveCheckpoint(const TrainState& state, const std::string& path);
// Throws ErrorCode::kIncompatible when `expected` is given and differs from
// the stored configuration, or when the version is unknown.
TrainState LoadCheckpoint(const std::string& path,
                          const std::optional<ModelConfig>& expected = std::nullopt);

}  // namespace specflow
