// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specflow/specflow.h"

namespace {

// Carries a failed C API status out of a command.
class ApiError : public std::runtime_error {
 public:
  explicit ApiError(specflow_status status)
      : std::runtime_error(std::string(specflow_status_string(status)) + ": " +
                           specflow_last_error()) {}
};

void Check(specflow_status status) {
  if (status != SPECFLOW_OK) throw ApiError(status);
}

struct ConfigDeleter {
  void operator()(specflow_config* c) const { specflow_config_destroy(c); }
};
struct TrainerDeleter {
  void operator()(specflow_trainer* t) const { specflow_trainer_destroy(t); }
};
struct ModelDeleter {
  void operator()(specflow_model* m) const { specflow_model_destroy(m); }
};
using ConfigPtr = std::unique_ptr<specflow_config, ConfigDeleter>;
using TrainerPtr = std::unique_ptr<specflow_trainer, TrainerDeleter>;
using ModelPtr = std::unique_ptr<specflow_model, ModelDeleter>;

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string config_path;
  std::vector<std::string> overrides;
};

void PrintLine(const char* line, void*) { std::printf("%s\n", line); }

void EchoOverride(const char* line, void*) { std::printf("config: %s\n", line); }

void SetKey(specflow_config* cfg, const std::string& key, const std::string& value) {
  Check(specflow_config_set(cfg, key.c_str(), value.c_str()));
  std::printf("config: %s = %s\n", key.c_str(), value.c_str());
}

// Default configuration for `mode`, then the --config file, then
// --set overrides; every override is echoed.
ConfigPtr MakeConfig(const GlobalOptions& g, const char* mode) {
  specflow_config* raw = nullptr;
  Check(specflow_config_create(mode, &raw));
  ConfigPtr cfg(raw);
  if (!g.config_path.empty()) {
    Check(specflow_config_load_file(cfg.get(), g.config_path.c_str(), EchoOverride, nullptr));
  }
  for (const std::string& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    }
    SetKey(cfg.get(), kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

ModelPtr LoadModel(const specflow_config* cfg, const std::string& checkpoint) {
  specflow_model* raw = nullptr;
  Check(specflow_model_load(cfg, checkpoint.c_str(), &raw));
  return ModelPtr(raw);
}

struct TrainOptions {
  std::string manifest;
  std::string out;
  std::string init;
  std::string resume;
  std::string log;
  std::string task;
  int steps = 0;
};

struct LogTarget {
  std::ofstream file;
};

void OnTrainLog(int, double, double, const char* line, void* user) {
  std::printf("%s\n", line);
  std::fflush(stdout);
  auto* target = static_cast<LogTarget*>(user);
  if (target->file.is_open()) target->file << line << '\n' << std::flush;
}

void RunTraining(const GlobalOptions& g, const TrainOptions& o, const char* mode) {
  ConfigPtr cfg = MakeConfig(g, mode);
  SetKey(cfg.get(), "train.seed", std::to_string(g.seed));
  if (!o.task.empty()) SetKey(cfg.get(), "train.task", o.task);
  if (o.steps > 0) SetKey(cfg.get(), "train.total_steps", std::to_string(o.steps));

  specflow_trainer* raw = nullptr;
  Check(specflow_trainer_create(cfg.get(), o.manifest.c_str(),
                                o.init.empty() ? nullptr : o.init.c_str(),
                                o.resume.empty() ? nullptr : o.resume.c_str(), &raw));
  TrainerPtr trainer(raw);
  LogTarget target;
  if (!o.log.empty()) {
    target.file.open(o.log, std::ios::app);
    if (!target.file) throw std::runtime_error("cannot open log file " + o.log);
  }
  Check(specflow_trainer_run(trainer.get(), 0, OnTrainLog, &target));
  Check(specflow_trainer_save(trainer.get(), o.out.c_str()));
  int step = 0;
  Check(specflow_trainer_step(trainer.get(), &step));
  std::printf("saved checkpoint %s at step %d\n", o.out.c_str(), step);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"specflow: flow-matching speech restoration"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--config", g.config_path, "key = value configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Configuration override key=value (repeatable)");

  TrainOptions pre;
  auto* pretrain = app.add_subcommand("pretrain", "Masked-condition pretraining on clean audio");
  pretrain->add_option("--manifest", pre.manifest, "Training manifest")->required();
  pretrain->add_option("--out", pre.out, "Output checkpoint")->required();
  pretrain->add_option("--resume", pre.resume, "Resume from a checkpoint");
  pretrain->add_option("--steps", pre.steps, "Total updates (overrides train.total_steps)");
  pretrain->add_option("--log", pre.log, "Append loss records to this file");

  TrainOptions fine;
  auto* finetune = app.add_subcommand("finetune", "Task finetuning");
  finetune->add_option("--task", fine.task, "denoise | bwe | codec | tse")->required();
  finetune->add_option("--manifest", fine.manifest, "Training manifest")->required();
  finetune->add_option("--out", fine.out, "Output checkpoint")->required();
  auto* init_opt =
      finetune->add_option("--init", fine.init, "Pretrained checkpoint (omit to train from scratch)");
  finetune->add_option("--resume", fine.resume, "Resume from a checkpoint")->excludes(init_opt);
  finetune->add_option("--steps", fine.steps, "Total updates (overrides train.total_steps)");
  finetune->add_option("--log", fine.log, "Append loss records to this file");

  std::string in_wav, out_wav, checkpoint, task = "denoise";
  auto* enhance = app.add_subcommand("enhance", "Restore a degraded recording");
  enhance->add_option("--in", in_wav, "Input WAV")->required()->check(CLI::ExistingFile);
  enhance->add_option("--out", out_wav, "Output WAV")->required();
  enhance->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  enhance->add_option("--task", task, "denoise | bwe | codec")->capture_default_str();

  std::string mixture, reference;
  auto* extract = app.add_subcommand("extract", "Target speaker extraction");
  extract->add_option("--mixture", mixture, "Mixture WAV")->required()->check(CLI::ExistingFile);
  extract->add_option("--reference", reference, "Reference WAV of the target speaker")
      ->required()
      ->check(CLI::ExistingFile);
  extract->add_option("--out", out_wav, "Output WAV")->required();
  extract->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();

  std::string manifest, report;
  auto* evaluate = app.add_subcommand("evaluate", "Score a manifest");
  evaluate->add_option("--manifest", manifest, "Evaluation manifest")->required();
  evaluate->add_option("--checkpoint", checkpoint,
                       "Model used for records without estimate_path");
  evaluate->add_option("--report", report, "Write JSON-lines report here");

  std::string out_dir;
  int count = 0;
  auto* synth = app.add_subcommand("synth-data", "Write a toy corpus and manifest");
  synth->add_option("--task", task, "denoise | bwe | codec | tse")->required();
  synth->add_option("--count", count, "Number of items")->required()->check(CLI::NonNegativeNumber);
  synth->add_option("--out-dir", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    const CLI::App* failing = &app;
    for (const CLI::App* sub : app.get_subcommands()) failing = sub;
    std::fprintf(stderr, "%s", failing->help().c_str());
    return 2;
  }

  try {
    if (*pretrain) {
      RunTraining(g, pre, "pretrain");
    } else if (*finetune) {
      RunTraining(g, fine, fine.init.empty() && fine.resume.empty() ? "scratch" : "finetune");
    } else if (*enhance) {
      ConfigPtr cfg = MakeConfig(g, nullptr);
      ModelPtr model = LoadModel(cfg.get(), checkpoint);
      Check(specflow_enhance_file(model.get(), cfg.get(), task.c_str(), in_wav.c_str(),
                                  out_wav.c_str(), g.seed));
      std::printf("wrote %s\n", out_wav.c_str());
    } else if (*extract) {
      ConfigPtr cfg = MakeConfig(g, nullptr);
      ModelPtr model = LoadModel(cfg.get(), checkpoint);
      Check(specflow_extract_file(model.get(), cfg.get(), mixture.c_str(), reference.c_str(),
                                  out_wav.c_str(), g.seed));
      std::printf("wrote %s\n", out_wav.c_str());
    } else if (*evaluate) {
      ConfigPtr cfg = MakeConfig(g, nullptr);
      ModelPtr model;
      if (!checkpoint.empty()) model = LoadModel(cfg.get(), checkpoint);
      specflow_eval_summary summary{};
      Check(specflow_evaluate(cfg.get(), manifest.c_str(), model.get(), g.seed,
                              report.empty() ? nullptr : report.c_str(), &summary, PrintLine,
                              nullptr));
    } else if (*synth) {
      MakeConfig(g, nullptr);  // rejects unknown keys even though synthesis ignores them
      std::string path(4096, '\0');
      Check(specflow_synth_corpus(task.c_str(), count, g.seed, out_dir.c_str(), path.data(),
                                  path.size(), nullptr));
      path.resize(path.find('\0'));
      std::printf("wrote %d items, manifest %s\n", count, path.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
