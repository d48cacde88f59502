// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "training.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "error.hpp"

namespace specflow {

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'P', 'F', 'L', 'O', 'W', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void CheckFinite(double loss, int step) {
  if (!std::isfinite(loss)) {
    Fail(ErrorCode::kNumerical,
         "non-finite training loss at step " + std::to_string(step));
  }
}

// Runs forward + backward for one item and accumulates the gradient scaled
// by `weight`. Returns the item loss.
double AccumulateItem(const VectorFieldModel& model, const ConditionInput& cond,
                      const TrainingTuple& tuple, const std::vector<bool>* support,
                      double weight, std::vector<double>& gradient, ForwardTape& tape) {
  const FeatureGrid& shape = cond.features;
  FeatureGrid x_t(shape.channels, shape.frames);
  x_t.values = tuple.x_t;
  const FeatureGrid pred = Forward(model, x_t, cond, tuple.t, &tape);
  double loss;
  std::vector<double> d_out;
  if (support) {
    loss = MaskedCfmLoss(pred.values, tuple.target, shape.channels, *support);
    d_out = MaskedCfmLossGradient(pred.values, tuple.target, shape.channels, *support);
  } else {
    loss = CfmLoss(pred.values, tuple.target);
    d_out = CfmLossGradient(pred.values, tuple.target);
  }
  for (double& g : d_out) g *= weight;
  Backward(model, tape, d_out, gradient);
  return loss;
}

void WriteBytes(std::ostream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename T>
void WritePod(std::ostream& os, T value) {
  WriteBytes(os, &value, sizeof(T));
}

template <typename T>
T ReadPod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  Require(is.good(), ErrorCode::kFormat, "truncated checkpoint");
  return value;
}

void WriteDoubles(std::ostream& os, const std::vector<double>& v) {
  WritePod<std::uint64_t>(os, v.size());
  WriteBytes(os, v.data(), v.size() * sizeof(double));
}

std::vector<double> ReadDoubles(std::istream& is) {
  const auto n = ReadPod<std::uint64_t>(is);
  Require(n < (1ull << 34), ErrorCode::kFormat, "corrupt checkpoint array size");
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  Require(is.good(), ErrorCode::kFormat, "truncated checkpoint");
  return v;
}

void WriteString(std::ostream& os, const std::string& s) {
  WritePod<std::uint64_t>(os, s.size());
  WriteBytes(os, s.data(), s.size());
}

std::string ReadString(std::istream& is) {
  const auto n = ReadPod<std::uint64_t>(is);
  Require(n < (1ull << 24), ErrorCode::kFormat, "corrupt checkpoint string");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  Require(is.good(), ErrorCode::kFormat, "truncated checkpoint");
  return s;
}

nlohmann::json ConfigToJson(const ModelConfig& c) {
  return {{"num_layers", c.num_layers},
          {"model_dim", c.model_dim},
          {"num_heads", c.num_heads},
          {"feature_channels", c.feature_channels},
          {"time_embed_dim", c.time_embed_dim},
          {"feedforward_dim", c.feedforward_dim},
          {"null_condition_embedding", c.null_condition_embedding}};
}

ModelConfig ConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.feature_channels = j.at("feature_channels").get<int>();
  c.time_embed_dim = j.at("time_embed_dim").get<int>();
  c.feedforward_dim = j.at("feedforward_dim").get<int>();
  c.null_condition_embedding = j.at("null_condition_embedding").get<bool>();
  return c;
}

std::string DescribeConfig(const ModelConfig& c) { return ConfigToJson(c).dump(); }

}  // namespace

std::string TrainModeName(TrainMode mode) {
  switch (mode) {
    case TrainMode::kPretrain: return "pretrain";
    case TrainMode::kFinetune: return "finetune";
    case TrainMode::kScratch: return "scratch";
  }
  return "unknown";
}

TrainMode ParseTrainMode(const std::string& name) {
  if (name == "pretrain") return TrainMode::kPretrain;
  if (name == "finetune") return TrainMode::kFinetune;
  if (name == "scratch") return TrainMode::kScratch;
  Fail(ErrorCode::kInvalidArgument, "unknown training mode: " + name);
}

std::string LossSupportName(LossSupport support) {
  return support == LossSupport::kAllFrames ? "all" : "masked";
}

LossSupport ParseLossSupport(const std::string& name) {
  if (name == "all") return LossSupport::kAllFrames;
  if (name == "masked") return LossSupport::kMaskedOnly;
  Fail(ErrorCode::kInvalidArgument, "unknown loss support: " + name);
}

TrainConfig TrainConfig::Defaults(TrainMode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  switch (mode) {
    case TrainMode::kPretrain:
      break;
    case TrainMode::kFinetune:
      cfg.peak_lr = 2e-5;
      cfg.final_lr = 0.0;
      cfg.batch_seconds = 50.0;
      cfg.condition_dropout = 0.0;
      break;
    case TrainMode::kScratch:
      cfg.peak_lr = 1e-4;
      cfg.final_lr = 0.0;
      cfg.batch_seconds = 50.0;
      cfg.condition_dropout = 0.0;
      break;
  }
  return cfg;
}

void TrainConfig::Validate() const {
  Require(peak_lr > 0.0 && final_lr >= 0.0 && final_lr <= peak_lr,
          ErrorCode::kInvalidArgument, "learning rates must satisfy 0 <= final <= peak, peak > 0");
  Require(warmup_steps >= 0 && warmup_steps < total_steps, ErrorCode::kInvalidArgument,
          "warmup_steps must be smaller than total_steps");
  Require(batch_seconds > 0.0 && segment_seconds >= 0.0, ErrorCode::kInvalidArgument,
          "batch and segment durations must be positive");
  Require(mask_ratio >= 0.0 && mask_ratio <= 1.0 && mask_min_span >= 1,
          ErrorCode::kInvalidArgument, "invalid mask parameters");
  Require(condition_dropout >= 0.0 && condition_dropout <= 1.0, ErrorCode::kInvalidArgument,
          "condition dropout must lie in [0, 1]");
  Require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
              adam_eps > 0.0,
          ErrorCode::kInvalidArgument, "invalid Adam hyperparameters");
}

double LrSchedule(int step, const TrainConfig& cfg) {
  Require(step >= 0 && step <= cfg.total_steps, ErrorCode::kInvalidArgument,
          "step " + std::to_string(step) + " outside the schedule");
  if (step < cfg.warmup_steps) {
    return cfg.peak_lr * static_cast<double>(step) / cfg.warmup_steps;
  }
  const double progress = static_cast<double>(step - cfg.warmup_steps) /
                          static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return cfg.final_lr +
         (cfg.peak_lr - cfg.final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void LossStats::Add(double value) {
  last = value;
  ema = count == 0 ? value : 0.98 * ema + 0.02 * value;
  sum += value;
  ++count;
}

TrainState::TrainState(VectorFieldModel m, std::uint64_t seed)
    : model(std::move(m)), rng(seed) {
  adam.m.assign(model.parameters.size(), 0.0);
  adam.v.assign(model.parameters.size(), 0.0);
}

TrainState InitTrainState(const ModelConfig& model, const TrainConfig& cfg) {
  Rng init(cfg.seed);
  VectorFieldModel m = InitParameters(model, init);
  return TrainState(std::move(m), init.NextSeed());
}

double ApplyAdam(TrainState& state, std::vector<double>& gradient, const TrainConfig& cfg,
                 double lr) {
  Require(gradient.size() == state.model.parameters.size(), ErrorCode::kShapeMismatch,
          "gradient size does not match the parameters");
  double norm_sq = 0.0;
  for (double g : gradient) norm_sq += g * g;
  const double norm = std::sqrt(norm_sq);
  Require(std::isfinite(norm), ErrorCode::kNumerical, "non-finite gradient");
  if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
    const double s = cfg.grad_clip / norm;
    for (double& g : gradient) g *= s;
  }
  const int t = state.step + 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
  ParameterVector& p = state.model.parameters;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g = gradient[i];
    double& m = state.adam.m[i];
    double& v = state.adam.v[i];
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g;
    p[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
  }
  state.step = t;
  return norm;
}

StepResult PretrainStep(TrainState& state, std::span<const FeatureGrid> batch,
                        const TrainConfig& cfg, const FlowPathConfig& flow) {
  Require(!batch.empty(), ErrorCode::kInvalidArgument, "empty training batch");
  const int step = state.step + 1;
  StepResult result;
  result.step = step;
  result.lr = LrSchedule(step, cfg);
  std::vector<double> gradient(state.model.parameters.size(), 0.0);
  const double weight = 1.0 / static_cast<double>(batch.size());
  ForwardTape tape;
  double loss = 0.0;
  for (const FeatureGrid& clean : batch) {
    const MaskSpec mask = SampleMask(clean.frames, cfg.mask_ratio, cfg.mask_min_span, state.rng);
    ConditionInput cond = MaybeDropCondition(ApplyMask(clean, mask), cfg.condition_dropout,
                                             state.rng);
    if (cond.is_null) ++result.null_conditions;
    const TrainingTuple tuple = SampleTrainingTuple(clean.values, flow, state.rng);
    std::vector<bool> support;
    const std::vector<bool>* support_ptr = nullptr;
    if (cfg.loss_support == LossSupport::kMaskedOnly) {
      // A dropped condition leaves every frame unconditioned.
      support = cond.is_null ? std::vector<bool>(clean.frames, true) : mask.frame_flags;
      support_ptr = &support;
    }
    loss += weight * AccumulateItem(state.model, cond, tuple, support_ptr, weight, gradient, tape);
  }
  CheckFinite(loss, step);
  result.loss = loss;
  result.grad_norm = ApplyAdam(state, gradient, cfg, result.lr);
  state.loss.Add(loss);
  return result;
}

FinetuneExample MakeFinetuneExample(TaskKind task, const AudioSignal& degraded,
                                    const AudioSignal& clean, const AudioSignal* reference,
                                    const StftParams& stft, const CompressionParams& cp,
                                    const TsePromptSpec& prompt) {
  Require(degraded.size() == clean.size(), ErrorCode::kShapeMismatch,
          "degraded and clean signals differ in length");
  FinetuneExample ex;
  ex.condition = BuildCondition(task, degraded, reference, stft, cp, prompt);
  if (task == TaskKind::kTargetSpeakerExtract) {
    ex.clean = AnalyzeFeatures(PrependPrompt(*reference, clean, prompt), stft, cp);
  } else {
    ex.clean = AnalyzeFeatures(clean, stft, cp);
  }
  return ex;
}

StepResult FinetuneStep(TrainState& state, std::span<const FinetuneExample> batch,
                        const TrainConfig& cfg, const FlowPathConfig& flow) {
  Require(!batch.empty(), ErrorCode::kInvalidArgument, "empty training batch");
  const int step = state.step + 1;
  StepResult result;
  result.step = step;
  result.lr = LrSchedule(step, cfg);
  std::vector<double> gradient(state.model.parameters.size(), 0.0);
  const double weight = 1.0 / static_cast<double>(batch.size());
  ForwardTape tape;
  double loss = 0.0;
  for (const FinetuneExample& ex : batch) {
    Require(ex.condition.features.SameShape(ex.clean), ErrorCode::kShapeMismatch,
            "condition and target shapes differ");
    Require(!ex.condition.is_null, ErrorCode::kInvalidArgument,
            "finetuning requires a condition");
    const TrainingTuple tuple = SampleTrainingTuple(ex.clean.values, flow, state.rng);
    loss += weight * AccumulateItem(state.model, ex.condition, tuple, nullptr, weight, gradient, tape);
  }
  CheckFinite(loss, step);
  result.loss = loss;
  result.grad_norm = ApplyAdam(state, gradient, cfg, result.lr);
  state.loss.Add(loss);
  return result;
}

DurationBatcher::DurationBatcher(std::vector<int> frame_counts, double frames_per_second,
                                 double batch_seconds, double segment_seconds)
    : frame_counts_(std::move(frame_counts)),
      frames_per_second_(frames_per_second),
      batch_seconds_(batch_seconds),
      segment_seconds_(segment_seconds) {
  Require(!frame_counts_.empty(), ErrorCode::kInvalidArgument, "no training utterances");
  Require(frames_per_second > 0.0 && batch_seconds > 0.0, ErrorCode::kInvalidArgument,
          "invalid batching parameters");
  std::vector<std::size_t> order(frame_counts_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frame_counts_[a] < frame_counts_[b];
  });
  constexpr std::size_t kBucketSize = 16;
  for (std::size_t i = 0; i < order.size(); i += kBucketSize) {
    buckets_.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + kBucketSize)));
  }
}

std::vector<DurationBatcher::Item> DurationBatcher::Next(Rng& rng) const {
  const auto& bucket =
      buckets_[static_cast<std::size_t>(rng.UniformInt(0, static_cast<std::int64_t>(buckets_.size()) - 1))];
  int seg = frame_counts_[bucket.front()];
  if (segment_seconds_ > 0.0) {
    seg = std::min(seg, std::max(1, static_cast<int>(std::lround(segment_seconds_ * frames_per_second_))));
  }
  const int count = std::max(
      1, static_cast<int>(std::floor(batch_seconds_ * frames_per_second_ / seg + 1e-9)));
  std::vector<Item> items(count);
  for (Item& item : items) {
    item.index = bucket[static_cast<std::size_t>(rng.UniformInt(0, static_cast<std::int64_t>(bucket.size()) - 1))];
    item.frames = seg;
    item.start = static_cast<int>(rng.UniformInt(0, frame_counts_[item.index] - seg));
  }
  return items;
}

std::string FormatLogRecord(const TrainLogRecord& record) {
  nlohmann::json j = {{"step", record.step}, {"lr", record.lr}, {"loss", record.loss}};
  return j.dump();
}

namespace {

int ResolveUntil(int until_step, const TrainConfig& cfg) {
  const int until = until_step > 0 ? until_step : cfg.total_steps;
  Require(until <= cfg.total_steps, ErrorCode::kInvalidArgument,
          "requested steps exceed total_steps");
  return until;
}

}  // namespace

void TrainPretrain(TrainState& state, const std::vector<FeatureGrid>& clean,
                   double frames_per_second, const TrainConfig& cfg,
                   const FlowPathConfig& flow, int until_step, const LogSink& sink) {
  cfg.Validate();
  std::vector<int> counts;
  for (const FeatureGrid& g : clean) counts.push_back(g.frames);
  const DurationBatcher batcher(counts, frames_per_second, cfg.batch_seconds,
                                cfg.segment_seconds);
  const int until = ResolveUntil(until_step, cfg);
  std::vector<FeatureGrid> batch;
  while (state.step < until) {
    batch.clear();
    for (const auto& item : batcher.Next(state.rng)) {
      batch.push_back(clean[item.index].Slice(item.start, item.frames));
    }
    const StepResult r = PretrainStep(state, batch, cfg, flow);
    if (sink) sink({r.step, r.lr, r.loss});
  }
}

void TrainFinetune(TrainState& state, const std::vector<FinetuneExample>& examples,
                   double frames_per_second, const TrainConfig& cfg,
                   const FlowPathConfig& flow, int until_step, const LogSink& sink) {
  cfg.Validate();
  std::vector<int> counts;
  for (const FinetuneExample& ex : examples) counts.push_back(ex.clean.frames);
  const DurationBatcher batcher(counts, frames_per_second, cfg.batch_seconds,
                                cfg.segment_seconds);
  const int until = ResolveUntil(until_step, cfg);
  std::vector<FinetuneExample> batch;
  while (state.step < until) {
    batch.clear();
    for (const auto& item : batcher.Next(state.rng)) {
      const FinetuneExample& ex = examples[item.index];
      FinetuneExample cropped;
      cropped.condition.features = ex.condition.features.Slice(item.start, item.frames);
      cropped.clean = ex.clean.Slice(item.start, item.frames);
      batch.push_back(std::move(cropped));
    }
    const StepResult r = FinetuneStep(state, batch, cfg, flow);
    if (sink) sink({r.step, r.lr, r.loss});
  }
}

void SaveCheckpoint(const TrainState& state, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  Require(os.good(), ErrorCode::kIo, "cannot write checkpoint: " + path);
  WriteBytes(os, kCheckpointMagic, sizeof(kCheckpointMagic));
  WritePod<std::uint32_t>(os, kCheckpointVersion);
  nlohmann::json header = {{"model", ConfigToJson(state.model.config)},
                           {"step", state.step},
                           {"rng", state.rng.Serialize()},
                           {"loss", {{"last", state.loss.last},
                                     {"ema", state.loss.ema},
                                     {"sum", state.loss.sum},
                                     {"count", state.loss.count}}}};
  WriteString(os, header.dump());
  const auto& segments = state.model.layout().segments();
  WritePod<std::uint32_t>(os, static_cast<std::uint32_t>(segments.size()));
  for (const ParameterSegment& s : segments) {
    WriteString(os, s.name);
    WritePod<std::uint32_t>(os, static_cast<std::uint32_t>(s.rows));
    WritePod<std::uint32_t>(os, static_cast<std::uint32_t>(s.cols));
    WriteBytes(os, state.model.parameters.data() + s.offset, s.size() * sizeof(double));
  }
  WriteDoubles(os, state.adam.m);
  WriteDoubles(os, state.adam.v);
  Require(os.good(), ErrorCode::kIo, "checkpoint write failed: " + path);
}

TrainState LoadCheckpoint(const std::string& path, const std::optional<ModelConfig>& expected) {
  std::ifstream is(path, std::ios::binary);
  Require(is.good(), ErrorCode::kIo, "cannot open checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic)];
  is.read(magic, sizeof(magic));
  Require(is.good() && std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0,
          ErrorCode::kFormat, path + ": not a checkpoint file");
  const auto version = ReadPod<std::uint32_t>(is);
  Require(version == kCheckpointVersion, ErrorCode::kIncompatible,
          path + ": unsupported checkpoint version " + std::to_string(version));

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(ReadString(is));
  } catch (const nlohmann::json::exception&) {
    Fail(ErrorCode::kFormat, path + ": corrupt checkpoint header");
  }
  ModelConfig config;
  try {
    config = ConfigFromJson(header.at("model"));
  } catch (const nlohmann::json::exception&) {
    Fail(ErrorCode::kFormat, path + ": checkpoint header lacks a model configuration");
  }
  if (expected && !(*expected == config)) {
    Fail(ErrorCode::kIncompatible, path + ": checkpoint model " + DescribeConfig(config) +
                                       " does not match the requested " +
                                       DescribeConfig(*expected));
  }

  TrainState state{VectorFieldModel(config)};
  try {
    state.step = header.at("step").get<int>();
    state.rng = Rng::Deserialize(header.at("rng").get<std::string>());
    const auto& loss = header.at("loss");
    state.loss.last = loss.at("last").get<double>();
    state.loss.ema = loss.at("ema").get<double>();
    state.loss.sum = loss.at("sum").get<double>();
    state.loss.count = loss.at("count").get<std::int64_t>();
  } catch (const nlohmann::json::exception&) {
    Fail(ErrorCode::kFormat, path + ": corrupt checkpoint header");
  }
  Require(state.step >= 0, ErrorCode::kFormat, path + ": negative step counter");

  const auto count = ReadPod<std::uint32_t>(is);
  const auto& segments = state.model.layout().segments();
  Require(count == segments.size(), ErrorCode::kFormat, path + ": segment count mismatch");
  for (const ParameterSegment& s : segments) {
    const std::string name = ReadString(is);
    const auto rows = ReadPod<std::uint32_t>(is);
    const auto cols = ReadPod<std::uint32_t>(is);
    Require(name == s.name && rows == static_cast<std::uint32_t>(s.rows) &&
                cols == static_cast<std::uint32_t>(s.cols),
            ErrorCode::kFormat, path + ": unexpected segment " + name);
    is.read(reinterpret_cast<char*>(state.model.parameters.data() + s.offset),
            static_cast<std::streamsize>(s.size() * sizeof(double)));
    Require(is.good(), ErrorCode::kFormat, path + ": truncated segment " + name);
  }
  state.adam.m = ReadDoubles(is);
  state.adam.v = ReadDoubles(is);
  Require(state.adam.m.size() == state.model.parameters.size() &&
              state.adam.v.size() == state.model.parameters.size(),
          ErrorCode::kFormat, path + ": optimizer state size mismatch");
  return state;
}

}  // namespace specflow
