#include <algorithm>
#include <ostream>

#include "command_util.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/io.hpp"
#include "qdstrain/parallel.hpp"
#include "qdstrain/phonon.hpp"

namespace qdstrain {
using nlohmann::json;

namespace {

bool is_x0(const std::string& emitter) { return emitter.rfind("X0", 0) == 0; }

struct Outcome {
  std::optional<PhononFit> fit;
  std::vector<TemperaturePoint> used;
  std::vector<std::string> flags;
};

}  // namespace

int cmd_odonnell(const GlobalOptions& global, const OdonnellOptions& options, std::ostream& log) {
  const auto cfg = resolve_config(global);
  Report report = detail::start_report(cfg);
  auto series = io::read_temperature_csv(options.series);
  report.add_input(options.series);
  if (series.empty()) throw InvalidInput("odonnell: no temperature series in '" + options.series.string() + "'");
  std::sort(series.begin(), series.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  const auto outcomes = parallel_map(series.size(), global.jobs, [&](std::size_t i) {
    const auto& [emitter, points] = series[i];
    const double limit = is_x0(emitter) ? cfg.odonnell_max_T_x0 : cfg.odonnell_max_T_qd;
    Outcome o;
    for (const auto& p : points) {
      if (p.T <= limit) o.used.push_back(p);
    }
    std::sort(o.used.begin(), o.used.end(), [](const auto& a, const auto& b) { return a.T < b.T; });
    try {
      o.fit = fit_odonnell(o.used, cfg.solver, emitter);
      if (!o.fit->converged) o.flags.push_back("fit did not converge");
      if (o.fit->degenerate) o.flags.push_back("S and <hw> are degenerate over this temperature range");
    } catch (const InvalidInput& e) {
      o.flags.push_back(e.what());
    } catch (const NumericalError& e) {
      o.flags.push_back(e.what());
    }
    return o;
  });

  std::string fits_csv = "emitter,species,n_points,max_T_K,E0_meV,E0_err_meV,S,S_err,hw_avg_meV,hw_avg_err_meV,"
                         "delta_E_40K_meV,condition_number,converged,degenerate\n";
  std::string table_csv = "emitter,T_K,E_meV,E_err_meV,delta_E_meV,model_delta_E_meV\n";
  json emitters = json::array();
  std::vector<PhononFit> qd_fits;
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& emitter = series[i].first;
    const auto& o = outcomes[i];
    const bool x0 = is_x0(emitter);
    json points = json::array();
    for (const auto& p : o.used) {
      json pj = {{"T_K", p.T}, {"E_meV", detail::round_energy(p.E)}, {"E_err_meV", detail::round_energy(p.E_err)}};
      if (o.fit) {
        const double d = p.E - o.fit->E0, m = delta_E_at(*o.fit, p.T);
        pj["delta_E_meV"] = detail::round_energy(d);
        pj["model_delta_E_meV"] = detail::round_energy(m);
        table_csv += emitter + "," + io::format_number(p.T) + "," + io::format_energy(p.E) + "," +
                     io::format_energy(p.E_err) + "," + io::format_energy(d) + "," + io::format_energy(m) + "\n";
      }
      points.push_back(pj);
    }
    json ej = {{"emitter", emitter}, {"species", x0 ? "X0" : "QD"}, {"points", points}, {"flags", o.flags}};
    if (o.fit) {
      const auto& f = *o.fit;
      const double d40 = delta_E_at(f, 40.0);
      fits_csv += emitter + "," + (x0 ? "X0" : "QD") + "," + std::to_string(o.used.size()) + "," +
                  io::format_number(o.used.back().T) + "," + io::format_energy(f.E0) + "," +
                  io::format_energy(f.E0_error()) + "," + io::format_number(f.S) + "," + io::format_number(f.S_error()) +
                  "," + io::format_energy(f.hw_avg) + "," + io::format_energy(f.hw_avg_error()) + "," +
                  io::format_energy(d40) + "," + io::format_number(f.condition_number) + "," +
                  (f.converged ? "true" : "false") + "," + (f.degenerate ? "true" : "false") + "\n";
      ej["fit"] = {{"E0_meV", detail::round_energy(f.E0)}, {"E0_err_meV", detail::round_energy(f.E0_error())},
                   {"S", f.S}, {"S_err", f.S_error()}, {"hw_avg_meV", detail::round_energy(f.hw_avg)},
                   {"hw_avg_err_meV", detail::round_energy(f.hw_avg_error())},
                   {"delta_E_40K_meV", detail::round_energy(d40)}, {"condition_number", f.condition_number},
                   {"converged", f.converged}, {"degenerate", f.degenerate}};
      if (!x0 && f.converged) qd_fits.push_back(f);
    }
    for (const auto& flag : o.flags) detail::warn(log, emitter + ": " + flag);
    if (!o.flags.empty()) ++flagged;
    emitters.push_back(ej);
  }

  json stage = {{"emitters", emitters}, {"n_emitters", series.size()}, {"n_flagged", flagged},
                {"max_T_qd_K", cfg.odonnell_max_T_qd}, {"max_T_x0_K", cfg.odonnell_max_T_x0}};
  if (qd_fits.size() >= 3) {
    const auto trend = confinement_trend(qd_fits);
    stage["confinement_trend"] = {{"n_qd", qd_fits.size()},
                                  {"s_slope_per_meV", trend.s_slope},
                                  {"rank_correlation", trend.correlation_defined ? json(trend.rank_correlation) : json()},
                                  {"shift40_slope", trend.shift40_slope}};
  }
  io::write_text_file(global.output_dir / "odonnell_fits.csv", fits_csv);
  io::write_text_file(global.output_dir / "delta_e.csv", table_csv);
  report.stages["odonnell"] = stage;
  report.save(global.output_dir / "odonnell.report.json");
  log << "odonnell: " << series.size() << " emitters, " << flagged << " flagged\n";
  return flagged ? kExitPartial : kExitOk;
}

}  // namespace qdstrain
