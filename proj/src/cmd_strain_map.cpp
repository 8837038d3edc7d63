#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>

#include "command_util.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/io.hpp"

namespace qdstrain {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Location {
  std::string key;  // sample/location
  std::string location_id;
  std::string sample;
  std::string material;
  double energy = 0.0;
  double energy_err = 0.0;
};

std::string location_key(const io::PeakRow& r) {
  return r.meta.sample + "/" + (r.meta.location_id.empty() ? r.spectrum : r.meta.location_id);
}

using ReferenceLookup = std::function<std::optional<double>(const io::PeakRow&)>;

/// One X0 line per location: a row labelled X0 wins, then the line nearest the
/// location's reference within the search window, then a lone line.
std::map<std::string, Location> x0_lines(const std::vector<io::PeakRow>& rows, const AnalysisConfig& cfg,
                                         const ReferenceLookup& reference) {
  std::map<std::string, std::vector<const io::PeakRow*>> by_location;
  for (const auto& r : rows) by_location[location_key(r)].push_back(&r);
  std::map<std::string, Location> out;
  for (auto& [key, list] : by_location) {
    std::sort(list.begin(), list.end(), [](const auto* a, const auto* b) {
      return std::tie(a->spectrum, a->peak) < std::tie(b->spectrum, b->peak);
    });
    const io::PeakRow* pick = nullptr;
    for (const auto* r : list) {
      if (r->species == Species::x0) {
        pick = r;
        break;
      }
    }
    if (!pick) {
      if (const auto ref = reference(*list.front())) {
        double best = cfg.peaks.x0_search_window_meV;
        for (const auto* r : list) {
          if (std::abs(r->fit.center - *ref) <= best) {
            best = std::abs(r->fit.center - *ref);
            pick = r;
          }
        }
      } else if (list.size() == 1) {
        pick = list.front();
      }
    }
    if (!pick) continue;
    out[key] = {key, pick->meta.location_id.empty() ? pick->spectrum : pick->meta.location_id, pick->meta.sample,
                pick->meta.material, pick->fit.center, pick->fit.center_error()};
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double spread_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

int cmd_strain_map(const GlobalOptions& global, const StrainMapOptions& options, std::ostream& log) {
  const auto cfg = resolve_config(global);
  Report report = detail::start_report(cfg);
  std::vector<std::string> flags;

  const auto rows = io::read_peak_csv(options.peaks);
  report.add_input(options.peaks);
  std::map<std::string, std::pair<double, double>> refs;  // location_id -> (E, err)
  if (options.references) {
    const auto t = io::CsvTable::read(*options.references);
    report.add_input(*options.references);
    const auto c_loc = t.column("location_id"), c_e = t.column("reference_meV");
    const auto c_err = t.find("reference_err_meV");
    for (std::size_t r = 0; r < t.rows(); ++r) {
      refs[t.text(r, c_loc)] = {t.number(r, c_e), c_err ? t.number(r, *c_err) : 0.0};
    }
  }

  const ReferenceLookup rt_reference = [&](const io::PeakRow& r) -> std::optional<double> {
    if (const auto it = refs.find(r.meta.location_id.empty() ? r.spectrum : r.meta.location_id); it != refs.end()) {
      return it->second.first;
    }
    if (options.reference_meV) return options.reference_meV;
    const auto it = cfg.materials.find(r.meta.material);
    return it == cfg.materials.end() ? std::nullopt : it->second.x0_reference_meV;
  };
  const auto rt = x0_lines(rows, cfg, rt_reference);
  if (rt.empty()) throw InvalidInput("strain-map: no X0 line found in '" + options.peaks.string() + "'");

  struct Result {
    Location loc;
    double reference = 0.0, reference_err = 0.0;
    ShiftMeasurement shift;
    StrainEstimate strain;
    std::optional<StrainEstimate> relaxation;
    std::optional<double> cold_energy, varshni_expected;
    std::optional<StrainEstimate> raman;
  };
  std::vector<Result> results;
  for (const auto& [key, loc] : rt) {
    Result r;
    r.loc = loc;
    if (const auto it = refs.find(loc.location_id); it != refs.end()) {
      std::tie(r.reference, r.reference_err) = it->second;
    } else if (options.reference_meV) {
      r.reference = *options.reference_meV;
      r.reference_err = options.reference_err_meV;
    } else {
      const auto& m = cfg.material(loc.material);
      if (!m.x0_reference_meV) {
        throw InvalidInput("strain-map: no reference energy for location '" + loc.location_id + "' (material '" +
                           loc.material + "')");
      }
      r.reference = *m.x0_reference_meV;
      r.reference_err = m.x0_reference_err_meV;
    }
    const auto& gauge = cfg.material(loc.material).gauge_x0;
    if (!gauge) throw InvalidInput("strain-map: no X0 gauge factor for material '" + loc.material + "'");
    r.shift.delta_E = loc.energy - r.reference;
    r.shift.delta_E_err = shift_error_subtraction(loc.energy_err, r.reference_err);
    r.shift.context = loc.location_id;
    r.strain = strain_from_shift(r.shift, *gauge);
    results.push_back(std::move(r));
  }

  if (options.cold) {
    const auto cold = x0_lines(io::read_peak_csv(*options.cold), cfg, [](const io::PeakRow&) { return std::optional<double>{}; });
    report.add_input(*options.cold);
    for (auto& r : results) {
      const auto it = cold.find(r.loc.key);
      if (it == cold.end()) {
        flags.push_back(r.loc.key + ": no X0 line at low temperature");
        continue;
      }
      const auto& m = cfg.material(r.loc.material);
      const auto varshni = options.varshni ? options.varshni : m.varshni;
      if (!varshni) throw InvalidInput("strain-map: --cold needs Varshni parameters for material '" + r.loc.material + "'");
      ShiftMeasurement cooled;
      cooled.delta_E = it->second.energy - r.loc.energy;
      cooled.delta_E_err = shift_error_subtraction(it->second.energy_err, r.loc.energy_err);
      r.cold_energy = it->second.energy;
      r.varshni_expected = varshni_shift(*varshni, 296.0, 4.0);
      try {
        r.relaxation = decompose_temperature_shift(cooled, *r.varshni_expected, *m.gauge_x0);
      } catch (const DomainError& e) {
        flags.push_back(r.loc.key + ": " + e.what());
      }
    }
  }

  json raman_stage;
  if (options.raman) {
    const auto t = io::CsvTable::read(*options.raman);
    report.add_input(*options.raman);
    const auto c_loc = t.column("location_id"), c_s = t.column("raman_shift_cm1");
    const auto c_err = t.find("raman_shift_err_cm1");
    std::map<std::string, std::pair<double, double>> shifts;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      shifts[t.text(r, c_loc)] = {t.number(r, c_s), c_err ? t.number(r, *c_err) : 0.0};
    }
    std::vector<double> diff;
    for (auto& r : results) {
      const auto it = shifts.find(r.loc.location_id);
      if (it == shifts.end()) continue;
      const auto coefficient =
          options.raman_coefficient ? options.raman_coefficient : cfg.material(r.loc.material).raman_coefficient;
      if (!coefficient) throw InvalidInput("strain-map: --raman needs a Raman coefficient for '" + r.loc.material + "'");
      r.raman = strain_from_raman_shift(it->second.first, it->second.second, *coefficient);
      diff.push_back(r.strain.epsilon - r.raman->epsilon);
    }
    if (diff.empty()) {
      flags.push_back("no location has both PL and Raman data");
    } else {
      const double sd = spread_of(diff);
      raman_stage = {{"n", diff.size()}, {"mean_difference_pct", mean_of(diff)}, {"std_difference_pct", sd},
                     {"tolerance_pct", 0.18}, {"consistent", sd <= 0.18}};
      if (sd > 0.18) flags.push_back("PL and Raman strains differ by more than 0.18% (std)");
    }
  }

  std::string csv =
      "location_id,sample,material,x0_meV,reference_meV,delta_E_meV,delta_E_err_meV,strain_pct,strain_err_pct,"
      "x0_4K_meV,relaxation_pct,relaxation_err_pct,raman_strain_pct\n";
  json locations = json::array();
  std::map<std::pair<std::string, std::string>, std::vector<const Result*>> by_sample;
  for (const auto& r : results) {
    by_sample[{r.loc.sample, r.loc.material}].push_back(&r);
    auto opt = [](const auto& v, auto f) { return v ? f(*v) : std::string{}; };
    csv += r.loc.location_id + "," + r.loc.sample + "," + r.loc.material + "," + io::format_energy(r.loc.energy) + "," +
           io::format_energy(r.reference) + "," + io::format_energy(r.shift.delta_E) + "," +
           io::format_energy(r.shift.delta_E_err) + "," + io::format_number(r.strain.epsilon) + "," +
           io::format_number(r.strain.epsilon_err) + "," + opt(r.cold_energy, io::format_energy) + "," +
           opt(r.relaxation, [](const auto& e) { return io::format_number(e.epsilon); }) + "," +
           opt(r.relaxation, [](const auto& e) { return io::format_number(e.epsilon_err); }) + "," +
           opt(r.raman, [](const auto& e) { return io::format_number(e.epsilon); }) + "\n";
    json j = {{"location_id", r.loc.location_id}, {"sample", r.loc.sample}, {"material", r.loc.material},
              {"x0_meV", detail::round_energy(r.loc.energy)}, {"reference_meV", detail::round_energy(r.reference)},
              {"delta_E_meV", detail::round_energy(r.shift.delta_E)}, {"strain_pct", r.strain.epsilon},
              {"strain_err_pct", r.strain.epsilon_err}};
    if (r.cold_energy) j["x0_4K_meV"] = detail::round_energy(*r.cold_energy);
    if (r.varshni_expected) j["varshni_expected_meV"] = detail::round_energy(*r.varshni_expected);
    if (r.relaxation) {
      j["relaxation_pct"] = r.relaxation->epsilon;
      j["relaxation_err_pct"] = r.relaxation->epsilon_err;
    }
    if (r.raman) j["raman_strain_pct"] = r.raman->epsilon;
    locations.push_back(j);
  }

  std::vector<io::StrainRow> table;
  json samples = json::array();
  for (const auto& [key, list] : by_sample) {
    std::vector<double> eps, errs, relax;
    for (const auto* r : list) {
      eps.push_back(r->strain.epsilon);
      errs.push_back(r->strain.epsilon_err);
      if (r->relaxation) relax.push_back(r->relaxation->epsilon);
    }
    const double mean = mean_of(eps), spread = spread_of(eps);
    const double sem = eps.size() > 1 ? spread / std::sqrt(static_cast<double>(eps.size())) : errs.front();
    StrainEstimate summary;
    summary.epsilon = mean;
    summary.epsilon_err = sem;
    const auto out = options.apply_relaxation ? apply_relaxation(summary, cfg.relaxation_pct) : summary;
    table.push_back({key.first, key.second, out.epsilon, out.epsilon_err});
    json j = {{"sample", key.first}, {"material", key.second}, {"n", eps.size()}, {"mean_pct", mean},
              {"spread_pct", spread}, {"sem_pct", sem}, {"mean_propagated_err_pct", mean_of(errs)},
              {"table_strain_pct", out.epsilon}, {"table_temperature_K", out.temperature_K}};
    if (!relax.empty()) {
      j["relaxation_mean_pct"] = mean_of(relax);
      j["relaxation_spread_pct"] = spread_of(relax);
    }
    samples.push_back(j);
  }

  io::write_text_file(global.output_dir / "strain_map.csv", csv);
  io::write_strain_table(global.output_dir / "strain_table.csv", table);
  json stage = {{"locations", locations}, {"samples", samples}, {"flags", flags},
                {"relaxation_applied_pct", options.apply_relaxation ? cfg.relaxation_pct : 0.0}};
  if (!raman_stage.is_null()) stage["raman"] = raman_stage;
  report.stages["strain_map"] = stage;
  report.save(global.output_dir / "strain_map.report.json");
  for (const auto& f : flags) detail::warn(log, f);
  log << "strain-map: " << results.size() << " locations in " << by_sample.size() << " samples\n";
  return flags.empty() ? kExitOk : kExitPartial;
}

}  // namespace qdstrain
