#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nmt::pipeline {

struct FileRecord {
  std::string path;  // relative to the workspace when inside it
  std::string sha256;

  bool operator==(const FileRecord&) const = default;
};

struct StageRecord {
  std::string name;
  std::string status;  // "ok" or "failed"
  std::map<std::string, std::string> parameters;
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;
  std::string digest;  // over the output digests, in order
  std::string timestamp;
  nlohmann::json metrics = nlohmann::json::object();
  std::string error;
};

/// Stage name -> record, kept in execution order.
class Manifest {
 public:
  const std::vector<StageRecord>& stages() const { return stages_; }
  bool empty() const { return stages_.empty(); }
  const StageRecord* find(const std::string& name) const;
  // Replaces a record with the same name or appends.
  void put(StageRecord record);
  // Drops every record after `name`.
  void truncate_after(const std::string& name);

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);

  // Serialized with sorted keys and two-space indentation.
  std::string dump() const;
  // Writes a sibling temporary, then renames it over `path`.
  void save(const std::filesystem::path& path) const;
  // Throws IoError if the file is missing, FormatError if it does not parse.
  static Manifest load(const std::filesystem::path& path);

 private:
  std::vector<StageRecord> stages_;
};

// Digest over the concatenated output digests.
std::string combined_digest(const std::vector<FileRecord>& files);

/// ISO-8601 UTC time. SOURCE_DATE_EPOCH, when set, replaces the clock so
/// repeated runs produce identical manifests.
std::string current_timestamp();

}  // namespace nmt::pipeline
