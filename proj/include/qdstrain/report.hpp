#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace qdstrain {

inline constexpr const char* kToolVersion = "qdstrain 1.0.0";

struct InputRecord {
  std::string path;
  std::string digest;  // FNV-1a of the file bytes
};

/// Structured command output: {version, config_hash, inputs[], stages{}}.
/// Nothing time- or host-dependent is recorded, so identical inputs and
/// configuration give byte-identical reports.
struct Report {
  std::string config_hash;
  std::vector<InputRecord> inputs;
  nlohmann::json stages = nlohmann::json::object();

  void add_input(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static Report from_json(const nlohmann::json& j);
  static Report load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

std::string file_digest(const std::filesystem::path& path);

}  // namespace qdstrain
