#include <algorithm>
#include <ostream>

#include "command_util.hpp"
#include "qdstrain/errors.hpp"

namespace qdstrain {
namespace fs = std::filesystem;

AnalysisConfig resolve_config(const GlobalOptions& options) {
  AnalysisConfig c = options.config_path.empty() ? parse_config(nlohmann::json::object()) : load_config(options.config_path);
  if (options.seed) c.seed = *options.seed;
  return c;
}

namespace detail {

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& entry : fs::directory_iterator(in)) {
        const auto& p = entry.path();
        const auto name = p.filename().string();
        if (!entry.is_regular_file() || name.ends_with(".meta.json")) continue;
        if (p.extension() == ".csv" || p.extension() == ".json") files.push_back(p);
      }
    } else if (fs::exists(in)) {
      files.push_back(in);
    } else {
      throw IoError("cannot read '" + in.string() + "'");
    }
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  return files;
}

Report start_report(const AnalysisConfig& config) {
  Report r;
  r.config_hash = config.hash;
  return r;
}

void warn(std::ostream& log, const std::string& message) { log << "warning: " << message << "\n"; }

}  // namespace detail
}  // namespace qdstrain
