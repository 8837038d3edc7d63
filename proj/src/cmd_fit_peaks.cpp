#include <algorithm>
#include <cmath>
#include <ostream>

#include "command_util.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/io.hpp"
#include "qdstrain/parallel.hpp"
#include "qdstrain/peaks.hpp"

namespace qdstrain {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Item {
  std::string name;
  fs::path path;
  Spectrum spectrum;
};

struct Outcome {
  std::vector<PeakFit> fits;
  std::vector<std::string> flags;
};

Outcome analyse(const Spectrum& s, const AnalysisConfig& cfg) {
  Outcome out;
  const auto candidates = detect_peaks(s, cfg.peaks.min_prominence, cfg.peaks.min_separation_meV);
  if (candidates.empty()) {
    out.flags.push_back("no peak above the prominence threshold");
    return out;
  }
  const double hw = cfg.peaks.window_half_width_meV;
  const double lo = s.energy()[0], hi = s.energy()[s.size() - 1];

  // Lines whose windows overlap are fitted together over the union window.
  std::size_t first = 0;
  while (first < candidates.size()) {
    std::size_t last = first;
    while (last + 1 < candidates.size() && candidates[last + 1] - hw < candidates[last] + hw) ++last;
    const EnergyWindow window{std::max(lo, candidates[first] - hw), std::min(hi, candidates[last] + hw)};
    try {
      std::vector<PeakFit> initial;
      for (std::size_t k = first; k <= last; ++k) initial.push_back(estimate_peak(s, candidates[k], window, cfg.peaks.shape));
      for (auto& f : fit_peaks(s, window, initial, cfg.solver)) out.fits.push_back(f);
    } catch (const InvalidInput& e) {
      out.flags.push_back("lines near " + io::format_energy(candidates[first]) + " meV skipped: " + e.what());
    } catch (const NumericalError& e) {
      out.flags.push_back("lines near " + io::format_energy(candidates[first]) + " meV failed: " + e.what());
    }
    first = last + 1;
  }
  for (std::size_t k = 0; k < out.fits.size(); ++k) {
    const auto where = "peak at " + io::format_energy(out.fits[k].center) + " meV";
    if (!out.fits[k].converged) out.flags.push_back(where + " did not converge");
    if (out.fits[k].sigma_at_floor) out.flags.push_back(where + " has its width at the grid-spacing floor");
  }
  return out;
}

std::optional<double> x0_reference(const SpectrumMeta& meta, const AnalysisConfig& cfg,
                                   const FitPeaksOptions& options) {
  if (options.x0_reference_meV) return options.x0_reference_meV;
  const auto it = cfg.materials.find(meta.material);
  if (it != cfg.materials.end()) return it->second.x0_reference_meV;
  return std::nullopt;
}

}  // namespace

int cmd_fit_peaks(const GlobalOptions& global, const FitPeaksOptions& options, std::ostream& log) {
  const auto cfg = resolve_config(global);
  const auto files = detail::expand_inputs(options.inputs);
  if (files.empty()) throw InvalidInput("fit-peaks: no spectrum files given");

  Report report = detail::start_report(cfg);
  std::vector<Item> items;
  for (const auto& f : files) {
    auto spectra = io::read_spectra(f);
    report.add_input(f);
    for (std::size_t k = 0; k < spectra.size(); ++k) {
      std::string name = f.stem().string();
      if (spectra.size() > 1) name += "#" + std::to_string(k);
      items.push_back({name, f, std::move(spectra[k])});
    }
  }

  const auto outcomes = parallel_map(items.size(), global.jobs, [&](std::size_t i) { return analyse(items[i].spectrum, cfg); });

  std::vector<io::PeakRow> rows;
  json spectra = json::array();
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& meta = items[i].spectrum.meta();
    const auto& o = outcomes[i];
    std::optional<std::size_t> x0_index;
    if (const auto ref = x0_reference(meta, cfg, options)) {
      double best = cfg.peaks.x0_search_window_meV;
      for (std::size_t k = 0; k < o.fits.size(); ++k) {
        const double d = std::abs(o.fits[k].center - *ref);
        if (d <= best) {
          best = d;
          x0_index = k;
        }
      }
    }
    json peaks = json::array();
    for (std::size_t k = 0; k < o.fits.size(); ++k) {
      const auto& f = o.fits[k];
      io::PeakRow row{items[i].name, k, x0_index == k ? Species::x0 : Species::qd, f, meta};
      peaks.push_back({{"center_meV", detail::round_energy(f.center)},
                       {"center_err_meV", detail::round_energy(f.center_error())},
                       {"fwhm_meV", detail::round_energy(f.fwhm())},
                       {"amplitude", f.amplitude},
                       {"species", to_string(row.species)},
                       {"converged", f.converged}});
      rows.push_back(std::move(row));
    }
    for (const auto& flag : o.flags) detail::warn(log, items[i].name + ": " + flag);
    if (!o.flags.empty()) ++flagged;
    spectra.push_back({{"name", items[i].name},
                       {"path", items[i].path.generic_string()},
                       {"location_id", meta.location_id},
                       {"sample", meta.sample},
                       {"material", meta.material},
                       {"temperature_K", meta.temperature_K},
                       {"peaks", peaks},
                       {"flags", o.flags}});
  }

  io::write_peak_csv(global.output_dir / "peaks.csv", rows);
  report.stages["fit_peaks"] = {{"spectra", spectra}, {"n_spectra", items.size()}, {"n_flagged", flagged}};
  report.save(global.output_dir / "fit_peaks.report.json");
  log << "fit-peaks: " << items.size() << " spectra, " << rows.size() << " peaks, " << flagged << " flagged\n";
  return flagged ? kExitPartial : kExitOk;
}

}  // namespace qdstrain
