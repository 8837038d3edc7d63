#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdstrain/commands.hpp"
#include "qdstrain/report.hpp"

namespace qdstrain::detail {

/// Energies in reports carry the same 1e-4 meV resolution as the CSV outputs.
inline double round_energy(double meV) { return std::round(meV * 1e4) / 1e4; }

/// Expands directories into their spectrum files; the result is sorted by path.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs);

Report start_report(const AnalysisConfig& config);

void warn(std::ostream& log, const std::string& message);

}  // namespace qdstrain::detail
