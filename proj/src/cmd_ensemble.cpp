#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "command_util.hpp"
#include "qdstrain/ensemble.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/io.hpp"
#include "qdstrain/parallel.hpp"

namespace qdstrain {
using nlohmann::json;

namespace {

struct SampleResult {
  std::string sample;
  std::string material;
  std::vector<double> energies;
  EnsembleStats stats;
  std::string flag;
};

double gauss_at(const HistogramGaussian& g, double x) {
  const double s = g.fwhm / kFwhmPerSigma;
  const double u = (x - g.peak_energy) / s;
  return g.amplitude * std::exp(-0.5 * u * u);
}

std::string safe_name(std::string s) {
  for (auto& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return s;
}

json regression_json(const RegressionResult& r) {
  return {{"slope", r.slope}, {"slope_err", r.slope_err}, {"intercept", r.intercept},
          {"intercept_err", r.intercept_err}, {"reduced_chi2", r.reduced_chi2}, {"converged", r.converged}};
}

json shift_list(const std::vector<ShiftMeasurement>& v) {
  json out = json::array();
  for (const auto& s : v) {
    out.push_back({{"location_id", s.context}, {"delta_E_meV", detail::round_energy(s.delta_E)},
                   {"delta_E_err_meV", detail::round_energy(s.delta_E_err)}});
  }
  return out;
}

}  // namespace

int cmd_ensemble(const GlobalOptions& global, const EnsembleOptions& options, std::ostream& log) {
  const auto cfg = resolve_config(global);
  Report report = detail::start_report(cfg);
  std::vector<std::string> flags;

  const auto rows = io::read_qd_energies(options.energies);
  report.add_input(options.energies);
  if (rows.empty()) throw InvalidInput("ensemble: no QD energies in '" + options.energies.string() + "'");
  std::map<std::string, SampleResult> by_sample;
  for (const auto& r : rows) {
    auto& s = by_sample[r.sample];
    if (s.energies.empty()) {
      s.sample = r.sample;
      s.material = r.material;
    } else if (s.material != r.material) {
      throw InvalidInput("ensemble: sample '" + r.sample + "' has rows for two materials");
    }
    s.energies.push_back(r.energy);
  }
  std::vector<SampleResult> samples;
  for (auto& [_, s] : by_sample) samples.push_back(std::move(s));

  const auto fitted = parallel_map(samples.size(), global.jobs, [&](std::size_t i) {
    SampleResult s = samples[i];
    s.stats = build_histogram(s.energies, cfg.bin_size_meV);
    try {
      s.stats = fit_gaussian_histogram(s.stats, cfg.solver, cfg.histogram_weighting);
      if (!s.stats.gauss->converged) s.flag = "Gaussian fit did not converge";
    } catch (const InvalidInput& e) {
      s.flag = e.what();
    } catch (const NumericalError& e) {
      s.flag = e.what();
    }
    return s;
  });

  std::map<std::string, io::StrainRow> strains;
  if (options.strains) {
    for (const auto& r : io::read_strain_table(*options.strains)) strains[r.sample] = r;
    report.add_input(*options.strains);
  }

  std::string summary = "sample,material,n_qd,peak_meV,peak_err_meV,fwhm_meV,fwhm_err_meV,strain_pct,strain_err_pct\n";
  json histograms = json::array();
  std::map<std::string, std::vector<const SampleResult*>> by_material;
  for (const auto& s : fitted) {
    if (!s.flag.empty()) flags.push_back(s.sample + ": " + s.flag);
    std::string hist = "bin_low_meV,bin_high_meV,center_meV,count,gauss_fit\n";
    json bins = json::array();
    for (std::size_t k = 0; k < s.stats.counts.size(); ++k) {
      const double c = s.stats.bin_center(k);
      const auto fit = s.stats.gauss ? io::format_number(gauss_at(*s.stats.gauss, c)) : std::string{};
      hist += io::format_energy(s.stats.edges[k]) + "," + io::format_energy(s.stats.edges[k + 1]) + "," +
              io::format_energy(c) + "," + std::to_string(s.stats.counts[k]) + "," + fit + "\n";
      bins.push_back({{"center_meV", detail::round_energy(c)}, {"count", s.stats.counts[k]}});
    }
    io::write_text_file(global.output_dir / ("histogram_" + safe_name(s.sample) + ".csv"), hist);

    json hj = {{"sample", s.sample}, {"material", s.material}, {"n_qd", s.energies.size()},
               {"bin_size_meV", s.stats.bin_size}, {"bins", bins}};
    std::string line = s.sample + "," + s.material + "," + std::to_string(s.energies.size()) + ",";
    if (s.stats.gauss) {
      const auto& g = *s.stats.gauss;
      hj["gauss"] = {{"peak_meV", detail::round_energy(g.peak_energy)},
                     {"peak_err_meV", detail::round_energy(g.peak_energy_err)},
                     {"fwhm_meV", detail::round_energy(g.fwhm)}, {"fwhm_err_meV", detail::round_energy(g.fwhm_err)},
                     {"amplitude", g.amplitude}};
      line += io::format_energy(g.peak_energy) + "," + io::format_energy(g.peak_energy_err) + "," +
              io::format_energy(g.fwhm) + "," + io::format_energy(g.fwhm_err) + ",";
    } else {
      line += ",,,,";
    }
    if (const auto it = strains.find(s.sample); it != strains.end()) {
      hj["strain_pct"] = it->second.strain;
      hj["strain_err_pct"] = it->second.strain_err;
      line += io::format_number(it->second.strain) + "," + io::format_number(it->second.strain_err);
      if (s.stats.gauss) by_material[s.material].push_back(&s);
    } else {
      line += ",";
    }
    summary += line + "\n";
    histograms.push_back(hj);
  }
  io::write_text_file(global.output_dir / "ensemble_summary.csv", summary);

  json gauge_fits = json::array(), broadening = json::array();
  if (!options.strains) flags.push_back("no strain table given; regression stages skipped");
  std::map<std::string, std::size_t> material_counts;
  for (const auto& s : fitted) ++material_counts[s.material];
  for (const auto& [material, count] : material_counts) {
    const auto it = by_material.find(material);
    const auto list = it == by_material.end() ? std::vector<const SampleResult*>{} : it->second;
    if (options.strains && list.size() < 3) {
      flags.push_back(material + ": " + std::to_string(list.size()) +
                      " samples with strain and a fitted ensemble; gauge regression needs 3");
    }
    if (list.size() >= 3) {
      std::vector<GaugeSample> gs;
      for (const auto* s : list) {
        const auto& st = strains.at(s->sample);
        StrainEstimate e;
        e.epsilon = st.strain;
        e.epsilon_err = st.strain_err;
        gs.push_back({e, s->stats.gauss->peak_energy, s->stats.gauss->peak_energy_err});
      }
      try {
        const auto fit = gauge_factor_fit(gs, Species::qd, material);
        json points = json::array();
        for (std::size_t k = 0; k < gs.size(); ++k) {
          points.push_back({{"sample", list[k]->sample}, {"strain_pct", gs[k].strain.epsilon},
                            {"strain_err_pct", gs[k].strain.epsilon_err},
                            {"peak_meV", detail::round_energy(gs[k].peak_energy)},
                            {"peak_err_meV", detail::round_energy(gs[k].energy_err)}});
        }
        gauge_fits.push_back({{"material", material}, {"gauge_meV_per_pct", fit.gauge.value},
                              {"gauge_err_meV_per_pct", fit.gauge.error}, {"regression", regression_json(fit.regression)},
                              {"points", points}});
      } catch (const InvalidInput& e) {
        flags.push_back(material + ": " + e.what());
      } catch (const NumericalError& e) {
        flags.push_back(material + ": " + e.what());
      }
    }
    if (list.empty()) continue;
    const auto mc = cfg.materials.find(material);
    if (mc == cfg.materials.end() || !mc->second.broadening_rate) {
      flags.push_back(material + ": no broadening rate configured; intercept fit skipped");
      continue;
    }
    std::vector<BroadeningPoint> bp;
    json points = json::array();
    for (const auto* s : list) {
      const auto& g = *s->stats.gauss;
      bp.push_back({strains.at(s->sample).strain, g.fwhm, g.fwhm_err});
      points.push_back({{"sample", s->sample}, {"strain_pct", bp.back().strain},
                        {"strain_err_pct", strains.at(s->sample).strain_err},
                        {"fwhm_meV", detail::round_energy(g.fwhm)}, {"fwhm_err_meV", detail::round_energy(g.fwhm_err)}});
    }
    const auto model = fit_broadening_intercept(bp, *mc->second.broadening_rate, mc->second.broadening_rate_err);
    broadening.push_back({{"material", material}, {"rate_meV_per_pct", model.rate}, {"rate_err", model.rate_err},
                          {"omega0_meV", model.omega0}, {"omega0_err_meV", model.omega0_err},
                          {"reduced_chi2", model.reduced_chi2}, {"points", points}});
  }

  json stage = {{"histograms", histograms}, {"gauge_fits", gauge_fits}, {"broadening", broadening}};

  if (options.piezo) {
    const auto shifts = io::read_shift_table(*options.piezo);
    report.add_input(*options.piezo);
    if (shifts.empty()) throw InvalidInput("ensemble: no shifts in '" + options.piezo->string() + "'");
    std::string material = options.piezo_material;
    if (material.empty() && material_counts.size() == 1) material = material_counts.begin()->first;
    const auto& gauge = cfg.material(material).gauge_x0;
    if (!gauge) throw InvalidInput("ensemble: no X0 gauge factor for material '" + material + "'");

    std::map<double, std::pair<std::vector<ShiftMeasurement>, std::vector<ShiftMeasurement>>> by_field;
    for (const auto& r : shifts) {
      auto& slot = by_field[r.field_kV_cm];
      (r.species == Species::x0 ? slot.second : slot.first).push_back(r.shift);
    }
    json fields = json::array();
    double max_field = 0.0;
    for (const auto& [f, v] : by_field) {
      fields.push_back({{"field_kV_cm", f}, {"qd", shift_list(v.first)}, {"x0", shift_list(v.second)}});
      if (std::abs(f) >= std::abs(max_field)) max_field = f;  // ties go to the positive field
    }
    const auto& [qd, x0] = by_field.at(max_field);
    json piezo = {{"material", material}, {"fields", fields}, {"max_field_kV_cm", max_field}};
    if (qd.empty() || x0.empty()) {
      flags.push_back("piezo: QD and X0 shifts are both needed at the largest field");
    } else {
      double x0_max = 0.0;
      for (const auto& s : x0) x0_max = std::max(x0_max, std::abs(s.delta_E));
      const double ref_strain = x0_max / std::abs(gauge->value);
      piezo["n_qd"] = qd.size();
      piezo["blueshift_fraction"] = blueshift_fraction(qd);
      piezo["qd_weighted_mean_meV"] = weighted_mean_shift(qd);
      piezo["x0_weighted_mean_meV"] = weighted_mean_shift(x0);
      piezo["reference_strain_pct"] = ref_strain;
      if (ref_strain > 0.0) {
        piezo["broadening_rate_meV_per_pct"] = broadening_rate(qd, ref_strain);
      } else {
        flags.push_back("piezo: X0 does not shift at the largest field; broadening rate undefined");
      }
    }
    stage["piezo"] = piezo;
  }

  stage["flags"] = flags;
  report.stages["ensemble"] = stage;
  report.save(global.output_dir / "ensemble.report.json");
  for (const auto& f : flags) detail::warn(log, f);
  log << "ensemble: " << fitted.size() << " samples, " << gauge_fits.size() << " gauge fits\n";
  return flags.empty() ? kExitOk : kExitPartial;
}

}  // namespace qdstrain
