// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "flowpath.hpp"
#include "sampler.hpp"
#include "spectral.hpp"
#include "tasks.hpp"
#include "training.hpp"
#include "vectorfield.hpp"

namespace specflow {

// Every tunable of a run, addressable as "section.field" keys. Defaults carry
// the published recipe: window 510 / hop 128, compression a = 0.5, b = 0.33,
// sigma_min = 1e-4, 70% span masking with 10-frame minimum spans, 10%
// condition dropout, Euler dt = 0.2, 3 s target-speaker prompt. The model
// defaults to a desk-scale 4-layer, 128-dim transformer.
struct RunConfig {
  StftParams stft;
  CompressionParams compression;
  FlowPathConfig flow;
  ModelConfig model;
  SolverConfig solver;
  TrainConfig train;
  TsePromptSpec prompt;
  std::string manifest;
  std::string checkpoint;
  std::string log_path;
  std::string out_dir;

  static RunConfig Defaults(TrainMode mode = TrainMode::kPretrain);

  // Throws ErrorCode::kInvalidArgument for unknown keys or malformed values.
  void Set(const std::string& key, const std::string& value);
  std::string Get(const std::string& key) const;
  static std::vector<std::string> Keys();

  // "key = value" lines; '#' starts a comment. Returns the applied
  // (key, value) pairs in file order.
  std::vector<std::pair<std::string, std::string>> LoadFile(const std::string& path);

  // Derives model.feature_channels from the STFT and checks cross-field
  // consistency.
  void Finalize();
  void Validate() const;
  GenerationParams Generation() const;
  // Frames per second of audio at `sample_rate`.
  double FrameRate(int sample_rate = 16000) const;
  std::string Dump() const;
};

}  // namespace specflow
