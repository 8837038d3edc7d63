#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qdstrain/config.hpp"

namespace qdstrain {

/// Process exit codes shared by all commands.
enum ExitCode : int { kExitOk = 0, kExitInputError = 1, kExitPartial = 2 };

struct GlobalOptions {
  std::filesystem::path config_path;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::filesystem::path output_dir = ".";
};

/// Loads the configuration named in `options` (or defaults) and applies --seed.
AnalysisConfig resolve_config(const GlobalOptions& options);

struct FitPeaksOptions {
  /// Files or directories; directories contribute their .csv/.json spectra.
  std::vector<std::filesystem::path> inputs;
  std::optional<double> x0_reference_meV;
};

struct StrainMapOptions {
  std::filesystem::path peaks;
  std::optional<double> reference_meV;
  double reference_err_meV = 0.0;
  /// CSV location_id,reference_meV[,reference_err_meV].
  std::optional<std::filesystem::path> references;
  /// Peak CSV of the same locations at 4 K.
  std::optional<std::filesystem::path> cold;
  std::optional<VarshniParams> varshni;
  /// CSV location_id,raman_shift_cm1,raman_shift_err_cm1.
  std::optional<std::filesystem::path> raman;
  std::optional<double> raman_coefficient;
  /// Shift the per-sample summary by the configured relaxation (room temperature to 4 K).
  bool apply_relaxation = false;
};

struct OdonnellOptions {
  std::filesystem::path series;
};

struct EnsembleOptions {
  std::filesystem::path energies;
  std::optional<std::filesystem::path> strains;
  std::optional<std::filesystem::path> piezo;
  std::string piezo_material;
};

struct SynthOptions {
  std::filesystem::path generator_config;
};

struct ReportPlotsOptions {
  std::vector<std::filesystem::path> reports;
};

int cmd_fit_peaks(const GlobalOptions& global, const FitPeaksOptions& options, std::ostream& log);
int cmd_strain_map(const GlobalOptions& global, const StrainMapOptions& options, std::ostream& log);
int cmd_odonnell(const GlobalOptions& global, const OdonnellOptions& options, std::ostream& log);
int cmd_ensemble(const GlobalOptions& global, const EnsembleOptions& options, std::ostream& log);
int cmd_synth(const GlobalOptions& global, const SynthOptions& options, std::ostream& log);
int cmd_report_plots(const GlobalOptions& global, const ReportPlotsOptions& options, std::ostream& log);

}  // namespace qdstrain
