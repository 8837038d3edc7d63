#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "qdstrain/ensemble.hpp"
#include "qdstrain/lineshape.hpp"
#include "qdstrain/nlls.hpp"
#include "qdstrain/strain.hpp"

namespace qdstrain {

struct MaterialConfig {
  std::optional<GaugeFactor> gauge_qd;
  std::optional<GaugeFactor> gauge_x0;
  /// Unstrained X0 emission energy used when no per-location reference is given.
  std::optional<double> x0_reference_meV;
  double x0_reference_err_meV = 0.0;
  std::optional<double> broadening_rate;  // meV FWHM per % strain
  double broadening_rate_err = 0.0;
  std::optional<double> raman_coefficient;  // cm^-1 per %
  std::optional<VarshniParams> varshni;
};

struct PeakSearchConfig {
  double min_prominence = 50.0;      // counts
  double min_separation_meV = 2.0;
  double window_half_width_meV = 8.0;
  LineShape shape = LineShape::gaussian;
  /// A peak within this distance of the material's X0 reference is labelled X0.
  double x0_search_window_meV = 40.0;
};

struct AnalysisConfig {
  std::map<std::string, MaterialConfig> materials;
  double relaxation_pct = -0.28;
  double bin_size_meV = 20.0;
  HistogramWeighting histogram_weighting = HistogramWeighting::poisson;
  SolverConfig solver;
  PeakSearchConfig peaks;
  double odonnell_max_T_qd = 38.0;  // K
  double odonnell_max_T_x0 = 94.0;  // K
  std::uint64_t seed = 1;
  /// FNV-1a of the canonical JSON dump, as 16 hex digits.
  std::string hash;

  const MaterialConfig& material(const std::string& name) const;
  void validate() const;
};

/// Parses JSON with // and /* */ comments allowed. Unknown keys are rejected
/// so typos do not silently fall back to defaults.
AnalysisConfig parse_config(const nlohmann::json& j);
AnalysisConfig load_config(const std::filesystem::path& path);
nlohmann::json parse_json_with_comments(const std::string& text, const std::string& source);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace qdstrain
