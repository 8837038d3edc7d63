#include "qdstrain/report.hpp"

#include "qdstrain/config.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/io.hpp"

namespace qdstrain {
using nlohmann::json;

std::string file_digest(const std::filesystem::path& path) { return fnv1a_hex(io::read_text_file(path)); }

void Report::add_input(const std::filesystem::path& path) {
  inputs.push_back({path.generic_string(), file_digest(path)});
}

json Report::to_json() const {
  json j;
  j["version"] = kToolVersion;
  j["config_hash"] = config_hash;
  j["inputs"] = json::array();
  for (const auto& in : inputs) j["inputs"].push_back({{"path", in.path}, {"digest", in.digest}});
  j["stages"] = stages;
  return j;
}

Report Report::from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("report: top level must be an object");
  Report r;
  try {
    r.config_hash = j.value("config_hash", std::string{});
    if (j.contains("inputs")) {
      for (const auto& in : j["inputs"]) r.inputs.push_back({in.at("path").get<std::string>(), in.value("digest", "")});
    }
    if (j.contains("stages")) {
      if (!j["stages"].is_object()) throw InvalidInput("report: 'stages' must be an object");
      r.stages = j["stages"];
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("report: ") + e.what());
  }
  return r;
}

Report Report::load(const std::filesystem::path& path) {
  return from_json(parse_json_with_comments(io::read_text_file(path), path.string()));
}

void Report::save(const std::filesystem::path& path) const { io::write_text_file(path, to_json().dump(2) + "\n"); }

}  // namespace qdstrain
