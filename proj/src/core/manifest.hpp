// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tasks.hpp"

namespace specflow {

// One utterance of a dataset manifest (a JSON object per line). Relative
// paths are resolved against the manifest's directory when loaded.
struct ManifestRecord {
  std::string id;
  TaskKind task = TaskKind::kDenoise;
  std::string clean_path;
  std::string degraded_path;
  std::string reference_path;  // required for target speaker extraction
  std::string estimate_path;   // optional precomputed output for evaluation
  nlohmann::json params = nlohmann::json::object();  // degradation parameters
};

struct ManifestIssue {
  int line = 0;
  std::string message;
};

struct ManifestLoadResult {
  std::vector<ManifestRecord> records;
  std::vector<ManifestIssue> issues;  // invalid lines skipped in lenient mode
  std::vector<std::string> warnings;
};

// Parses and validates a manifest. Invalid lines (bad JSON, unknown task,
// missing required field, missing file) are reported with their line number;
// `strict` turns the first one into an ErrorCode::kFormat error.
ManifestLoadResult LoadManifest(const std::string& path, bool strict = true,
                                bool check_files = true);

nlohmann::json RecordToJson(const ManifestRecord& record);
ManifestRecord RecordFromJson(const nlohmann::json& j);

// Writes paths as given.
void WriteManifest(const std::string& path, const std::vector<ManifestRecord>& records);

}  // namespace specflow
