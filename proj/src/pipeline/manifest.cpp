#include "nmt/pipeline/manifest.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "nmt/common/error.hpp"
#include "nmt/pipeline/digest.hpp"

namespace nmt::pipeline {
namespace {

constexpr int kManifestVersion = 1;

nlohmann::json files_to_json(const std::vector<FileRecord>& files) {
  auto arr = nlohmann::json::array();
  for (const auto& f : files) arr.push_back({{"path", f.path}, {"sha256", f.sha256}});
  return arr;
}

std::vector<FileRecord> files_from_json(const nlohmann::json& arr) {
  std::vector<FileRecord> out;
  for (const auto& f : arr) out.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
  return out;
}

}  // namespace

const StageRecord* Manifest::find(const std::string& name) const {
  for (const auto& s : stages_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void Manifest::put(StageRecord record) {
  for (auto& s : stages_) {
    if (s.name == record.name) {
      s = std::move(record);
      return;
    }
  }
  stages_.push_back(std::move(record));
}

void Manifest::truncate_after(const std::string& name) {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    if (stages_[i].name == name) {
      stages_.resize(i + 1);
      return;
    }
  }
}

nlohmann::json Manifest::to_json() const {
  auto stages = nlohmann::json::array();
  for (const auto& s : stages_) {
    nlohmann::json j;
    j["name"] = s.name;
    j["status"] = s.status;
    j["parameters"] = s.parameters;
    j["inputs"] = files_to_json(s.inputs);
    j["outputs"] = files_to_json(s.outputs);
    j["digest"] = s.digest;
    j["timestamp"] = s.timestamp;
    j["metrics"] = s.metrics;
    if (!s.error.empty()) j["error"] = s.error;
    stages.push_back(std::move(j));
  }
  return {{"version", kManifestVersion}, {"stages", stages}};
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("manifest must be a JSON object");
  Manifest m;
  if (j.value("version", 0) != kManifestVersion) {
    throw FormatError("unsupported manifest version " + j.value("version", nlohmann::json()).dump());
  }
  try {
    for (const auto& s : j.at("stages")) {
      StageRecord r;
      r.name = s.at("name").get<std::string>();
      r.status = s.at("status").get<std::string>();
      r.parameters = s.at("parameters").get<std::map<std::string, std::string>>();
      r.inputs = files_from_json(s.at("inputs"));
      r.outputs = files_from_json(s.at("outputs"));
      r.digest = s.at("digest").get<std::string>();
      r.timestamp = s.at("timestamp").get<std::string>();
      r.metrics = s.value("metrics", nlohmann::json::object());
      r.error = s.value("error", std::string());
      m.stages_.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

std::string Manifest::dump() const { return to_json().dump(2) + "\n"; }

void Manifest::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << dump();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move manifest into " + path.string() + ": " + ec.message());
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string combined_digest(const std::vector<FileRecord>& files) {
  std::string all;
  for (const auto& f : files) all += f.path + ' ' + f.sha256 + '\n';
  return sha256_hex(all);
}

std::string current_timestamp() {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch != '\0') {
    t = static_cast<std::time_t>(std::stoll(epoch));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace nmt::pipeline
