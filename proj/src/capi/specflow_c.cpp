// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "specflow/specflow.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "wav.hpp"

struct specflow_config {
  specflow::RunConfig rep;
};

struct specflow_trainer {
  specflow::Trainer rep;
};

struct specflow_model {
  specflow::VectorFieldModel rep;
};

namespace {

thread_local std::string g_last_error;

specflow_status Record(specflow_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
specflow_status Guard(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return SPECFLOW_OK;
  } catch (const specflow::Error& e) {
    return Record(static_cast<specflow_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return Record(SPECFLOW_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Record(SPECFLOW_ERR_INTERNAL, e.what());
  } catch (...) {
    return Record(SPECFLOW_ERR_INTERNAL, "unknown error");
  }
}

void NotNull(const void* p, const char* what) {
  specflow::Require(p != nullptr, specflow::ErrorCode::kInvalidArgument,
                    std::string(what) + " must not be null");
}

specflow_status CopyOut(const std::string& text, char* buffer, size_t capacity,
                        size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (buffer == nullptr || capacity < text.size() + 1) {
    return Record(SPECFLOW_ERR_BUFFER_TOO_SMALL,
                  "output buffer needs " + std::to_string(text.size() + 1) + " bytes");
  }
  std::memcpy(buffer, text.c_str(), text.size() + 1);
  return SPECFLOW_OK;
}

void EmitLines(const std::string& text, specflow_message_fn fn, void* user) {
  if (!fn) return;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) fn(line.c_str(), user);
}

}  // namespace

extern "C" {

const char* specflow_version(void) { return "0.1.0"; }

const char* specflow_status_string(specflow_status status) {
  switch (status) {
    case SPECFLOW_OK: return "ok";
    case SPECFLOW_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SPECFLOW_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case SPECFLOW_ERR_NUMERICAL: return "numerical error";
    case SPECFLOW_ERR_IO: return "i/o error";
    case SPECFLOW_ERR_FORMAT: return "format error";
    case SPECFLOW_ERR_INCOMPATIBLE: return "incompatible";
    case SPECFLOW_ERR_STATE: return "invalid state";
    case SPECFLOW_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case SPECFLOW_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* specflow_last_error(void) { return g_last_error.c_str(); }

specflow_status specflow_config_create(const char* mode, specflow_config** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = nullptr;
    const auto m = mode ? specflow::ParseTrainMode(mode) : specflow::TrainMode::kPretrain;
    *out = new specflow_config{specflow::RunConfig::Defaults(m)};
  });
}

void specflow_config_destroy(specflow_config* config) { delete config; }

specflow_status specflow_config_set(specflow_config* config, const char* key,
                                    const char* value) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(key, "key");
    NotNull(value, "value");
    config->rep.Set(key, value);
    config->rep.model.feature_channels = config->rep.stft.feature_channels();
  });
}

specflow_status specflow_config_get(const specflow_config* config, const char* key,
                                    char* buffer, size_t capacity, size_t* needed) {
  std::string value;
  const specflow_status st = Guard([&] {
    NotNull(config, "config");
    NotNull(key, "key");
    value = config->rep.Get(key);
  });
  return st == SPECFLOW_OK ? CopyOut(value, buffer, capacity, needed) : st;
}

specflow_status specflow_config_load_file(specflow_config* config, const char* path,
                                          specflow_message_fn on_override, void* user) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(path, "path");
    specflow::RunConfig next = config->rep;
    const auto applied = next.LoadFile(path);
    next.model.feature_channels = next.stft.feature_channels();
    config->rep = std::move(next);
    if (on_override) {
      for (const auto& [k, v] : applied) on_override((k + " = " + v).c_str(), user);
    }
  });
}

specflow_status specflow_config_dump(const specflow_config* config, char* buffer,
                                     size_t capacity, size_t* needed) {
  std::string text;
  const specflow_status st = Guard([&] {
    NotNull(config, "config");
    text = config->rep.Dump();
  });
  return st == SPECFLOW_OK ? CopyOut(text, buffer, capacity, needed) : st;
}

specflow_status specflow_synth_corpus(const char* task, int count, uint64_t seed,
                                      const char* out_dir, char* manifest_path,
                                      size_t capacity, size_t* needed) {
  std::string path;
  const specflow_status st = Guard([&] {
    NotNull(task, "task");
    NotNull(out_dir, "out_dir");
    path = specflow::SynthToyCorpus(specflow::ParseTask(task), count, seed, out_dir);
  });
  if (st != SPECFLOW_OK) return st;
  if (manifest_path == nullptr && needed == nullptr) return SPECFLOW_OK;
  return CopyOut(path, manifest_path, capacity, needed);
}

specflow_status specflow_trainer_create(const specflow_config* config, const char* manifest,
                                        const char* init, const char* resume,
                                        specflow_trainer** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = nullptr;
    NotNull(config, "config");
    NotNull(manifest, "manifest");
    *out = new specflow_trainer{
        specflow::Trainer(config->rep, manifest, init ? init : "", resume ? resume : "")};
  });
}

void specflow_trainer_destroy(specflow_trainer* trainer) { delete trainer; }

specflow_status specflow_trainer_run(specflow_trainer* trainer, int until_step,
                                     specflow_train_log_fn on_log, void* user) {
  return Guard([&] {
    NotNull(trainer, "trainer");
    trainer->rep.Run(until_step, [&](const specflow::TrainLogRecord& r) {
      if (on_log) on_log(r.step, r.lr, r.loss, specflow::FormatLogRecord(r).c_str(), user);
    });
  });
}

specflow_status specflow_trainer_step(const specflow_trainer* trainer, int* step) {
  return Guard([&] {
    NotNull(trainer, "trainer");
    NotNull(step, "step");
    *step = trainer->rep.state().step;
  });
}

specflow_status specflow_trainer_save(const specflow_trainer* trainer, const char* path) {
  return Guard([&] {
    NotNull(trainer, "trainer");
    NotNull(path, "path");
    trainer->rep.Save(path);
  });
}

specflow_status specflow_model_load(const specflow_config* config, const char* checkpoint,
                                    specflow_model** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = nullptr;
    NotNull(config, "config");
    NotNull(checkpoint, "checkpoint");
    config->rep.Validate();
    *out = new specflow_model{specflow::LoadModel(checkpoint, config->rep)};
  });
}

void specflow_model_destroy(specflow_model* model) { delete model; }

specflow_status specflow_model_parameter_count(const specflow_model* model, size_t* count) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(count, "count");
    *count = model->rep.parameters.size();
  });
}

specflow_status specflow_enhance_file(const specflow_model* model,
                                      const specflow_config* config, const char* task,
                                      const char* in_wav, const char* out_wav,
                                      uint64_t seed) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(config, "config");
    NotNull(task, "task");
    NotNull(in_wav, "in_wav");
    NotNull(out_wav, "out_wav");
    const specflow::TaskKind kind = specflow::ParseTask(task);
    specflow::Require(kind != specflow::TaskKind::kTargetSpeakerExtract,
                      specflow::ErrorCode::kInvalidArgument,
                      "target speaker extraction needs a reference; use extract");
    const specflow::AudioSignal in = specflow::ReadWav(in_wav);
    specflow::WriteWav(out_wav,
                       specflow::Restore(model->rep, config->rep, kind, in, nullptr, seed));
  });
}

specflow_status specflow_extract_file(const specflow_model* model,
                                      const specflow_config* config,
                                      const char* mixture_wav, const char* reference_wav,
                                      const char* out_wav, uint64_t seed) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(config, "config");
    NotNull(mixture_wav, "mixture_wav");
    NotNull(reference_wav, "reference_wav");
    NotNull(out_wav, "out_wav");
    const specflow::AudioSignal mixture = specflow::ReadWav(mixture_wav);
    const specflow::AudioSignal reference = specflow::ReadWav(reference_wav);
    specflow::WriteWav(out_wav, specflow::Restore(model->rep, config->rep,
                                                  specflow::TaskKind::kTargetSpeakerExtract,
                                                  mixture, &reference, seed));
  });
}

specflow_status specflow_evaluate(const specflow_config* config, const char* manifest,
                                  const specflow_model* model, uint64_t seed,
                                  const char* report_path, specflow_eval_summary* summary,
                                  specflow_message_fn on_summary, void* user) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(manifest, "manifest");
    const auto loaded = specflow::LoadManifest(manifest, true);
    const specflow::MetricsReport report = specflow::EvaluateRecords(
        loaded.records, config->rep, model ? &model->rep : nullptr, seed);
    if (report_path) {
      std::ofstream out(report_path);
      specflow::Require(out.good(), specflow::ErrorCode::kIo,
                        std::string("cannot write report: ") + report_path);
      out << report.ToJsonLines();
      specflow::Require(out.good(), specflow::ErrorCode::kIo,
                        std::string("write failed: ") + report_path);
    }
    if (summary) {
      summary->count = report.count;
      summary->mean_si_sdr = report.mean_si_sdr;
      summary->mean_si_sdr_improvement = report.mean_si_sdr_improvement;
      summary->mean_lsd = report.mean_lsd;
      summary->failure_rate = report.failure_rate;
    }
    for (const auto& w : loaded.warnings) EmitLines("warning: " + w, on_summary, user);
    EmitLines(report.SummaryTable(), on_summary, user);
  });
}

specflow_status specflow_si_sdr(const double* estimate, const double* reference,
                                size_t length, double* out_db) {
  return Guard([&] {
    NotNull(estimate, "estimate");
    NotNull(reference, "reference");
    NotNull(out_db, "out_db");
    *out_db = specflow::SiSdr(std::span<const double>(estimate, length),
                              std::span<const double>(reference, length));
  });
}

specflow_status specflow_failure_rate(const double* improvements_db, size_t count,
                                      double* out_rate) {
  return Guard([&] {
    NotNull(out_rate, "out_rate");
    if (count > 0) NotNull(improvements_db, "improvements_db");
    *out_rate = specflow::FailureRate(std::span<const double>(improvements_db, count));
  });
}

}  // extern "C"
