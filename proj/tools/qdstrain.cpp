#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qdstrain/commands.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/report.hpp"

namespace {

qdstrain::VarshniParams parse_varshni(const std::string& text) {
  std::istringstream in(text);
  qdstrain::VarshniParams v;
  char c1 = 0, c2 = 0;
  if (!(in >> v.E0 >> c1 >> v.alpha >> c2 >> v.beta) || c1 != ',' || c2 != ',' || !(in >> std::ws).eof()) {
    throw qdstrain::InvalidInput("--varshni expects E0_meV,alpha_meV_per_K,beta_K");
  }
  v.validate();
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace qdstrain;
  CLI::App app{"Strain and exciton-phonon analysis of quantum-dot emission in 2D semiconductors"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GlobalOptions global;
  std::string config_path, output_dir = ".";
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "Analysis configuration (JSON with comments)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured random seed");
  app.add_option("--jobs", global.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output-dir", output_dir, "Directory for all outputs");

  FitPeaksOptions fit;
  auto* c_fit = app.add_subcommand("fit-peaks", "Detect and fit emission lines in spectra");
  c_fit->add_option("inputs", fit.inputs, "Spectrum files or directories")->required();
  c_fit->add_option("--x0-reference-meV", fit.x0_reference_meV, "Label the line nearest this energy as X0");

  StrainMapOptions strain;
  std::string varshni_text;
  auto* c_strain = app.add_subcommand("strain-map", "Local strain from X0 shifts");
  c_strain->add_option("peaks", strain.peaks, "Peak CSV from fit-peaks")->required()->check(CLI::ExistingFile);
  c_strain->add_option("--reference-meV", strain.reference_meV, "Unstrained X0 energy for every location");
  c_strain->add_option("--reference-err-meV", strain.reference_err_meV, "Error of --reference-meV");
  c_strain->add_option("--references", strain.references, "CSV of per-location reference energies")
      ->check(CLI::ExistingFile);
  c_strain->add_option("--cold", strain.cold, "Peak CSV of the same locations at 4 K")->check(CLI::ExistingFile);
  c_strain->add_option("--varshni", varshni_text, "Varshni parameters E0,alpha,beta");
  c_strain->add_option("--raman", strain.raman, "CSV of Raman shifts per location")->check(CLI::ExistingFile);
  c_strain->add_option("--raman-coefficient", strain.raman_coefficient, "Raman shift per % strain (cm^-1)");
  c_strain->add_flag("--apply-relaxation", strain.apply_relaxation, "Report 4 K strains in the sample table");

  OdonnellOptions odonnell;
  auto* c_odonnell = app.add_subcommand("odonnell", "Fit the O'Donnell-Chen model to temperature series");
  c_odonnell->add_option("series", odonnell.series, "CSV emitter,T_K,E_meV,E_err_meV")
      ->required()
      ->check(CLI::ExistingFile);

  EnsembleOptions ensemble;
  auto* c_ensemble = app.add_subcommand("ensemble", "Ensemble histograms, gauge factors and broadening");
  c_ensemble->add_option("energies", ensemble.energies, "CSV of per-QD energies")->required()->check(CLI::ExistingFile);
  c_ensemble->add_option("--strains", ensemble.strains, "Per-sample strain table")->check(CLI::ExistingFile);
  c_ensemble->add_option("--piezo", ensemble.piezo, "Piezo-sweep shift table")->check(CLI::ExistingFile);
  c_ensemble->add_option("--piezo-material", ensemble.piezo_material, "Material of the piezo sample");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic dataset with ground truth");
  c_synth->add_option("generator", synth.generator_config, "Generator configuration")
      ->required()
      ->check(CLI::ExistingFile);

  ReportPlotsOptions plots;
  auto* c_plots = app.add_subcommand("report-plots", "Write plot-ready CSV files from reports");
  c_plots->add_option("reports", plots.reports, "Report JSON files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  global.config_path = config_path;
  global.output_dir = output_dir;
  if (*seed_opt) global.seed = seed;

  try {
    if (*c_fit) return cmd_fit_peaks(global, fit, std::cerr);
    if (*c_strain) {
      if (!varshni_text.empty()) strain.varshni = parse_varshni(varshni_text);
      return cmd_strain_map(global, strain, std::cerr);
    }
    if (*c_odonnell) return cmd_odonnell(global, odonnell, std::cerr);
    if (*c_ensemble) return cmd_ensemble(global, ensemble, std::cerr);
    if (*c_synth) return cmd_synth(global, synth, std::cerr);
    if (*c_plots) return cmd_report_plots(global, plots, std::cerr);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
