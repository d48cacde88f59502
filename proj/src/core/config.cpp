// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "error.hpp"

namespace specflow {

namespace {

template <typename T>
T ParseNumber(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    Fail(ErrorCode::kInvalidArgument, "config " + key + ": cannot parse '" + value + "'");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  Fail(ErrorCode::kInvalidArgument, "config " + key + ": expected a boolean, got '" + value + "'");
}

std::string FormatDouble(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define SPECFLOW_INT_FIELD(expr)                                                  \
  Field {                                                                         \
    [](const RunConfig& c) { return std::to_string(c.expr); },                    \
        [](RunConfig& c, const std::string& k, const std::string& v) {            \
          c.expr = ParseNumber<decltype(c.expr)>(k, v);                           \
        }                                                                         \
  }
#define SPECFLOW_DOUBLE_FIELD(expr)                                               \
  Field {                                                                         \
    [](const RunConfig& c) { return FormatDouble(c.expr); },                      \
        [](RunConfig& c, const std::string& k, const std::string& v) {            \
          c.expr = ParseNumber<double>(k, v);                                     \
        }                                                                         \
  }
#define SPECFLOW_STRING_FIELD(expr)                                               \
  Field {                                                                         \
    [](const RunConfig& c) { return c.expr; },                                    \
        [](RunConfig& c, const std::string&, const std::string& v) { c.expr = v; } \
  }

const std::map<std::string, Field>& Fields() {
  static const std::map<std::string, Field> fields = {
      {"stft.window_size", SPECFLOW_INT_FIELD(stft.window_size)},
      {"stft.hop_size", SPECFLOW_INT_FIELD(stft.hop_size)},
      {"compression.exponent", SPECFLOW_DOUBLE_FIELD(compression.exponent)},
      {"compression.scale", SPECFLOW_DOUBLE_FIELD(compression.scale)},
      {"flow.sigma_min", SPECFLOW_DOUBLE_FIELD(flow.sigma_min)},
      {"model.num_layers", SPECFLOW_INT_FIELD(model.num_layers)},
      {"model.model_dim", SPECFLOW_INT_FIELD(model.model_dim)},
      {"model.num_heads", SPECFLOW_INT_FIELD(model.num_heads)},
      {"model.time_embed_dim", SPECFLOW_INT_FIELD(model.time_embed_dim)},
      {"model.feedforward_dim", SPECFLOW_INT_FIELD(model.feedforward_dim)},
      {"model.null_condition_embedding",
       Field{[](const RunConfig& c) {
               return std::string(c.model.null_condition_embedding ? "true" : "false");
             },
             [](RunConfig& c, const std::string& k, const std::string& v) {
               c.model.null_condition_embedding = ParseBool(k, v);
             }}},
      {"solver.dt", SPECFLOW_DOUBLE_FIELD(solver.dt)},
      {"train.mode",
       Field{[](const RunConfig& c) { return TrainModeName(c.train.mode); },
             [](RunConfig& c, const std::string&, const std::string& v) {
               c.train.mode = ParseTrainMode(v);
             }}},
      {"train.peak_lr", SPECFLOW_DOUBLE_FIELD(train.peak_lr)},
      {"train.final_lr", SPECFLOW_DOUBLE_FIELD(train.final_lr)},
      {"train.warmup_steps", SPECFLOW_INT_FIELD(train.warmup_steps)},
      {"train.total_steps", SPECFLOW_INT_FIELD(train.total_steps)},
      {"train.batch_seconds", SPECFLOW_DOUBLE_FIELD(train.batch_seconds)},
      {"train.segment_seconds", SPECFLOW_DOUBLE_FIELD(train.segment_seconds)},
      {"train.seed", SPECFLOW_INT_FIELD(train.seed)},
      {"train.mask_ratio", SPECFLOW_DOUBLE_FIELD(train.mask_ratio)},
      {"train.mask_min_span", SPECFLOW_INT_FIELD(train.mask_min_span)},
      {"train.condition_dropout", SPECFLOW_DOUBLE_FIELD(train.condition_dropout)},
      {"train.task",
       Field{[](const RunConfig& c) { return TaskName(c.train.task); },
             [](RunConfig& c, const std::string&, const std::string& v) {
               c.train.task = ParseTask(v);
             }}},
      {"train.loss_support",
       Field{[](const RunConfig& c) { return LossSupportName(c.train.loss_support); },
             [](RunConfig& c, const std::string&, const std::string& v) {
               c.train.loss_support = ParseLossSupport(v);
             }}},
      {"train.grad_clip", SPECFLOW_DOUBLE_FIELD(train.grad_clip)},
      {"train.adam_beta1", SPECFLOW_DOUBLE_FIELD(train.adam_beta1)},
      {"train.adam_beta2", SPECFLOW_DOUBLE_FIELD(train.adam_beta2)},
      {"train.adam_eps", SPECFLOW_DOUBLE_FIELD(train.adam_eps)},
      {"tse.prompt_seconds", SPECFLOW_DOUBLE_FIELD(prompt.prompt_seconds)},
      {"tse.sample_rate", SPECFLOW_INT_FIELD(prompt.sample_rate)},
      {"io.manifest", SPECFLOW_STRING_FIELD(manifest)},
      {"io.checkpoint", SPECFLOW_STRING_FIELD(checkpoint)},
      {"io.log", SPECFLOW_STRING_FIELD(log_path)},
      {"io.out_dir", SPECFLOW_STRING_FIELD(out_dir)},
  };
  return fields;
}

#undef SPECFLOW_INT_FIELD
#undef SPECFLOW_DOUBLE_FIELD
#undef SPECFLOW_STRING_FIELD

const Field& Lookup(const std::string& key) {
  const auto& fields = Fields();
  const auto it = fields.find(key);
  Require(it != fields.end(), ErrorCode::kInvalidArgument, "unknown config key: " + key);
  return it->second;
}

}  // namespace

RunConfig RunConfig::Defaults(TrainMode mode) {
  RunConfig cfg;
  cfg.train = TrainConfig::Defaults(mode);
  cfg.Finalize();
  return cfg;
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  Lookup(key).set(*this, key, value);
}

std::string RunConfig::Get(const std::string& key) const { return Lookup(key).get(*this); }

std::vector<std::string> RunConfig::Keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : Fields()) keys.push_back(k);
  return keys;
}

std::vector<std::pair<std::string, std::string>> RunConfig::LoadFile(const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kIo, "cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> applied;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    Require(eq != std::string::npos, ErrorCode::kFormat,
            path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    try {
      Set(key, value);
    } catch (const Error& e) {
      Fail(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    applied.emplace_back(key, value);
  }
  return applied;
}

void RunConfig::Finalize() {
  model.feature_channels = stft.feature_channels();
  Validate();
}

void RunConfig::Validate() const {
  stft.Validate();
  compression.Validate();
  flow.Validate();
  model.Validate();
  solver.Validate();
  train.Validate();
  prompt.Validate();
  Require(model.feature_channels == stft.feature_channels(), ErrorCode::kInvalidArgument,
          "model.feature_channels must equal 2 * (window_size / 2 + 1)");
}

GenerationParams RunConfig::Generation() const {
  return GenerationParams{stft, compression, solver, prompt};
}

double RunConfig::FrameRate(int sample_rate) const {
  return static_cast<double>(sample_rate) / stft.hop_size;
}

std::string RunConfig::Dump() const {
  std::ostringstream os;
  for (const auto& [key, field] : Fields()) os << key << " = " << field.get(*this) << '\n';
  return os.str();
}

}  // namespace specflow
