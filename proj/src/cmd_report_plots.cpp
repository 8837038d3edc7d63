#include <cmath>
#include <functional>
#include <ostream>

#include "command_util.hpp"
#include "qdstrain/constants.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/io.hpp"

namespace qdstrain {
using nlohmann::json;

namespace {

std::string num(const json& j) {
  if (j.is_null()) return {};
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  if (j.is_string()) return j.get<std::string>();
  return io::format_number(j.get<double>());
}

std::string row(std::initializer_list<std::string> cells) {
  std::string out;
  for (const auto& c : cells) {
    if (!out.empty()) out += ",";
    out += c;
  }
  return out + "\n";
}

const json* stage(const json& stages, const char* name) {
  const auto it = stages.find(name);
  return it == stages.end() ? nullptr : &*it;
}

using Builder = std::function<std::optional<std::string>(const json& stages)>;

std::optional<std::string> fig1g(const json& stages) {
  const auto* e = stage(stages, "ensemble");
  if (!e || !e->contains("histograms")) return std::nullopt;
  std::string csv = "sample,material,center_meV,count,gauss_fit\n";
  for (const auto& h : (*e)["histograms"]) {
    for (const auto& b : h["bins"]) {
      std::string fit;
      if (h.contains("gauss")) {
        const auto& g = h["gauss"];
        const double s = g["fwhm_meV"].get<double>() / kFwhmPerSigma;
        const double u = (b["center_meV"].get<double>() - g["peak_meV"].get<double>()) / s;
        fit = io::format_number(g["amplitude"].get<double>() * std::exp(-0.5 * u * u));
      }
      csv += row({num(h["sample"]), num(h["material"]), num(b["center_meV"]), num(b["count"]), fit});
    }
  }
  return csv;
}

std::optional<std::string> fig2c(const json& stages) {
  const auto* s = stage(stages, "strain_map");
  if (!s) return std::nullopt;
  std::string csv = "location_id,sample,x0_rt_meV,x0_4K_meV,measured_shift_meV,varshni_shift_meV\n";
  bool any = false;
  for (const auto& l : (*s)["locations"]) {
    if (!l.contains("x0_4K_meV")) continue;
    any = true;
    const double shift = l["x0_4K_meV"].get<double>() - l["x0_meV"].get<double>();
    csv += row({num(l["location_id"]), num(l["sample"]), num(l["x0_meV"]), num(l["x0_4K_meV"]),
                io::format_energy(shift), l.contains("varshni_expected_meV") ? num(l["varshni_expected_meV"]) : ""});
  }
  if (!any) return std::nullopt;
  return csv;
}

std::optional<std::string> fig2d(const json& stages) {
  const auto* s = stage(stages, "strain_map");
  if (!s) return std::nullopt;
  std::string csv = "location_id,sample,strain_pct,strain_err_pct,relaxation_pct,relaxation_err_pct\n";
  for (const auto& l : (*s)["locations"]) {
    csv += row({num(l["location_id"]), num(l["sample"]), num(l["strain_pct"]), num(l["strain_err_pct"]),
                l.contains("relaxation_pct") ? num(l["relaxation_pct"]) : "",
                l.contains("relaxation_err_pct") ? num(l["relaxation_err_pct"]) : ""});
  }
  return csv;
}

std::optional<std::string> fig3ab(const json& stages) {
  const auto* e = stage(stages, "ensemble");
  if (!e || !e->contains("gauge_fits") || (*e)["gauge_fits"].empty()) return std::nullopt;
  std::string csv = "material,sample,strain_pct,strain_err_pct,peak_meV,peak_err_meV,fit_meV\n";
  for (const auto& f : (*e)["gauge_fits"]) {
    const double a = f["regression"]["intercept"].get<double>(), b = f["regression"]["slope"].get<double>();
    for (const auto& p : f["points"]) {
      csv += row({num(f["material"]), num(p["sample"]), num(p["strain_pct"]), num(p["strain_err_pct"]),
                  num(p["peak_meV"]), num(p["peak_err_meV"]),
                  io::format_energy(a + b * p["strain_pct"].get<double>())});
    }
  }
  return csv;
}

std::optional<std::string> fig3c(const json& stages) {
  const auto* e = stage(stages, "ensemble");
  if (!e || !e->contains("gauge_fits") || (*e)["gauge_fits"].empty()) return std::nullopt;
  std::string csv = "material,gauge_meV_per_pct,gauge_err_meV_per_pct,intercept_meV,intercept_err_meV,reduced_chi2\n";
  for (const auto& f : (*e)["gauge_fits"]) {
    const auto& r = f["regression"];
    csv += row({num(f["material"]), num(f["gauge_meV_per_pct"]), num(f["gauge_err_meV_per_pct"]), num(r["intercept"]),
                num(r["intercept_err"]), num(r["reduced_chi2"])});
  }
  return csv;
}

std::optional<std::string> fig3de(const json& stages) {
  const auto* e = stage(stages, "ensemble");
  if (!e || !e->contains("broadening") || (*e)["broadening"].empty()) return std::nullopt;
  std::string csv = "material,sample,strain_pct,strain_err_pct,fwhm_meV,fwhm_err_meV,model_fwhm_meV\n";
  for (const auto& b : (*e)["broadening"]) {
    const double w0 = b["omega0_meV"].get<double>(), rate = b["rate_meV_per_pct"].get<double>();
    for (const auto& p : b["points"]) {
      csv += row({num(b["material"]), num(p["sample"]), num(p["strain_pct"]), num(p["strain_err_pct"]),
                  num(p["fwhm_meV"]), num(p["fwhm_err_meV"]),
                  io::format_energy(w0 + rate * p["strain_pct"].get<double>())});
    }
  }
  return csv;
}

std::optional<std::string> fig4d(const json& stages) {
  const auto* e = stage(stages, "ensemble");
  if (!e || !e->contains("piezo")) return std::nullopt;
  std::string csv = "field_kV_cm,species,location_id,delta_E_meV,delta_E_err_meV\n";
  for (const auto& f : (*e)["piezo"]["fields"]) {
    for (const char* species : {"qd", "x0"}) {
      for (const auto& s : f[species]) {
        csv += row({num(f["field_kV_cm"]), species[0] == 'q' ? "QD" : "X0", num(s["location_id"]),
                    num(s["delta_E_meV"]), num(s["delta_E_err_meV"])});
      }
    }
  }
  return csv;
}

std::optional<std::string> fig4e(const json& stages) {
  const auto* e = stage(stages, "ensemble");
  if (!e || !e->contains("piezo")) return std::nullopt;
  const auto& p = (*e)["piezo"];
  std::string csv = "species,location_id,delta_E_meV,delta_E_err_meV\n";
  for (const auto& f : p["fields"]) {
    if (f["field_kV_cm"] != p["max_field_kV_cm"]) continue;
    for (const char* species : {"qd", "x0"}) {
      for (const auto& s : f[species]) {
        csv += row({species[0] == 'q' ? "QD" : "X0", num(s["location_id"]), num(s["delta_E_meV"]),
                    num(s["delta_E_err_meV"])});
      }
    }
  }
  return csv;
}

std::optional<std::string> fig5cd(const json& stages) {
  const auto* o = stage(stages, "odonnell");
  if (!o) return std::nullopt;
  std::string csv = "emitter,species,T_K,E_meV,E_err_meV,delta_E_meV,model_delta_E_meV\n";
  for (const auto& e : (*o)["emitters"]) {
    for (const auto& p : e["points"]) {
      csv += row({num(e["emitter"]), num(e["species"]), num(p["T_K"]), num(p["E_meV"]), num(p["E_err_meV"]),
                  p.contains("delta_E_meV") ? num(p["delta_E_meV"]) : "",
                  p.contains("model_delta_E_meV") ? num(p["model_delta_E_meV"]) : ""});
    }
  }
  return csv;
}

std::optional<std::string> fig5ef(const json& stages) {
  const auto* o = stage(stages, "odonnell");
  if (!o) return std::nullopt;
  std::string csv = "emitter,species,E0_meV,S,S_err,hw_avg_meV,hw_avg_err_meV,delta_E_40K_meV\n";
  bool any = false;
  for (const auto& e : (*o)["emitters"]) {
    if (!e.contains("fit")) continue;
    any = true;
    const auto& f = e["fit"];
    csv += row({num(e["emitter"]), num(e["species"]), num(f["E0_meV"]), num(f["S"]), num(f["S_err"]),
                num(f["hw_avg_meV"]), num(f["hw_avg_err_meV"]), num(f["delta_E_40K_meV"])});
  }
  if (!any) return std::nullopt;
  return csv;
}

}  // namespace

int cmd_report_plots(const GlobalOptions& global, const ReportPlotsOptions& options, std::ostream& log) {
  if (options.reports.empty()) throw InvalidInput("report-plots: no report given");
  json stages = json::object();
  for (const auto& path : options.reports) {
    const auto r = Report::load(path);
    for (const auto& [name, value] : r.stages.items()) stages[name] = value;
  }

  const std::pair<const char*, Builder> figures[] = {
      {"fig1g", fig1g}, {"fig2c", fig2c}, {"fig2d", fig2d}, {"fig3ab", fig3ab}, {"fig3c", fig3c},
      {"fig3de", fig3de}, {"fig4d", fig4d}, {"fig4e", fig4e}, {"fig5cd", fig5cd}, {"fig5ef", fig5ef},
  };
  std::size_t written = 0;
  for (const auto& [name, build] : figures) {
    std::optional<std::string> csv;
    try {
      csv = build(stages);
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("report-plots: malformed stage data for ") + name + ": " + e.what());
    }
    if (!csv) {
      detail::warn(log, std::string(name) + ": required stage data missing; skipped");
      continue;
    }
    io::write_text_file(global.output_dir / (std::string(name) + ".csv"), *csv);
    ++written;
  }
  log << "report-plots: " << written << " of " << std::size(figures) << " files written\n";
  return written == std::size(figures) ? kExitOk : kExitPartial;
}

}  // namespace qdstrain
