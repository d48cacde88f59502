// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "manifest.hpp"

#include <filesystem>
#include <fstream>

#include "error.hpp"

namespace specflow {

namespace fs = std::filesystem;

namespace {

std::string OptionalString(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return "";
  Require(j.at(key).is_string(), ErrorCode::kFormat, std::string("field '") + key +
                                                         "' must be a string");
  return j.at(key).get<std::string>();
}

std::string Resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

void CheckRecord(const ManifestRecord& r, bool check_files) {
  Require(!r.id.empty(), ErrorCode::kFormat, "missing 'id'");
  Require(!r.clean_path.empty(), ErrorCode::kFormat, "missing 'clean_path'");
  Require(!r.degraded_path.empty(), ErrorCode::kFormat, "missing 'degraded_path'");
  if (r.task == TaskKind::kTargetSpeakerExtract) {
    Require(!r.reference_path.empty(), ErrorCode::kFormat,
            "task 'tse' requires 'reference_path'");
  }
  if (!check_files) return;
  for (const std::string* p :
       {&r.clean_path, &r.degraded_path, &r.reference_path, &r.estimate_path}) {
    if (!p->empty()) {
      Require(fs::exists(*p), ErrorCode::kFormat, "file not found: " + *p);
    }
  }
}

}  // namespace

ManifestRecord RecordFromJson(const nlohmann::json& j) {
  Require(j.is_object(), ErrorCode::kFormat, "record must be a JSON object");
  ManifestRecord r;
  r.id = OptionalString(j, "id");
  const std::string task = OptionalString(j, "task");
  Require(!task.empty(), ErrorCode::kFormat, "missing 'task'");
  try {
    r.task = ParseTask(task);
  } catch (const Error& e) {
    Fail(ErrorCode::kFormat, e.what());
  }
  r.clean_path = OptionalString(j, "clean_path");
  r.degraded_path = OptionalString(j, "degraded_path");
  r.reference_path = OptionalString(j, "reference_path");
  r.estimate_path = OptionalString(j, "estimate_path");
  if (j.contains("params") && !j.at("params").is_null()) {
    Require(j.at("params").is_object(), ErrorCode::kFormat, "'params' must be an object");
    r.params = j.at("params");
  }
  return r;
}

nlohmann::json RecordToJson(const ManifestRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["task"] = TaskName(r.task);
  j["clean_path"] = r.clean_path;
  j["degraded_path"] = r.degraded_path;
  if (!r.reference_path.empty()) j["reference_path"] = r.reference_path;
  if (!r.estimate_path.empty()) j["estimate_path"] = r.estimate_path;
  j["params"] = r.params;
  return j;
}

ManifestLoadResult LoadManifest(const std::string& path, bool strict, bool check_files) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kIo, "cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();
  ManifestLoadResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        Fail(ErrorCode::kFormat, std::string("invalid JSON: ") + e.what());
      }
      ManifestRecord r = RecordFromJson(j);
      r.clean_path = Resolve(base, r.clean_path);
      r.degraded_path = Resolve(base, r.degraded_path);
      r.reference_path = Resolve(base, r.reference_path);
      r.estimate_path = Resolve(base, r.estimate_path);
      CheckRecord(r, check_files);
      result.records.push_back(std::move(r));
    } catch (const Error& e) {
      const std::string msg = path + ":" + std::to_string(line_no) + ": " + e.what();
      if (strict) Fail(ErrorCode::kFormat, msg);
      result.issues.push_back({line_no, msg});
    }
  }
  if (result.records.empty()) result.warnings.push_back("manifest has no records: " + path);
  return result;
}

void WriteManifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path);
  Require(out.good(), ErrorCode::kIo, "cannot write manifest: " + path);
  for (const auto& r : records) out << RecordToJson(r).dump() << '\n';
  Require(out.good(), ErrorCode::kIo, "write failed: " + path);
}

}  // namespace specflow
