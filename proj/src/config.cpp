#include "qdstrain/config.hpp"

#include <cstdio>
#include <set>

#include "qdstrain/errors.hpp"
#include "qdstrain/io.hpp"

namespace qdstrain {
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InvalidInput("config: '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw InvalidInput("config: unknown key '" + where + "." + key + "'");
  }
}

std::optional<double> opt_number(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

GaugeFactor parse_gauge(const json& j, const std::string& where, Species species, const std::string& material) {
  check_keys(j, where, {"value", "error"});
  GaugeFactor g{j.at("value").get<double>(), j.value("error", 0.0), species, material};
  try {
    g.validate();
  } catch (const InvalidInput& e) {
    throw InvalidInput("config: " + where + ": " + e.what());
  }
  return g;
}

MaterialConfig parse_material(const json& j, const std::string& name) {
  const std::string where = "materials." + name;
  check_keys(j, where,
             {"gauge", "x0_reference_meV", "x0_reference_err_meV", "broadening_rate", "broadening_rate_err",
              "raman_coefficient_cm1_per_pct", "varshni"});
  MaterialConfig m;
  if (j.contains("gauge")) {
    const auto& g = j["gauge"];
    check_keys(g, where + ".gauge", {"QD", "X0"});
    if (g.contains("QD")) m.gauge_qd = parse_gauge(g["QD"], where + ".gauge.QD", Species::qd, name);
    if (g.contains("X0")) m.gauge_x0 = parse_gauge(g["X0"], where + ".gauge.X0", Species::x0, name);
  }
  m.x0_reference_meV = opt_number(j, "x0_reference_meV");
  m.x0_reference_err_meV = j.value("x0_reference_err_meV", 0.0);
  m.broadening_rate = opt_number(j, "broadening_rate");
  m.broadening_rate_err = j.value("broadening_rate_err", 0.0);
  m.raman_coefficient = opt_number(j, "raman_coefficient_cm1_per_pct");
  if (j.contains("varshni") && !j["varshni"].is_null()) {
    const auto& v = j["varshni"];
    check_keys(v, where + ".varshni", {"E0_meV", "alpha_meV_per_K", "beta_K"});
    m.varshni = VarshniParams{v.at("E0_meV").get<double>(), v.at("alpha_meV_per_K").get<double>(),
                              v.at("beta_K").get<double>()};
  }
  return m;
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json parse_json_with_comments(const std::string& text, const std::string& source) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw InvalidInput(source + ": " + e.what());
  }
}

const MaterialConfig& AnalysisConfig::material(const std::string& name) const {
  const auto it = materials.find(name);
  if (it == materials.end()) throw InvalidInput("config: no entry for material '" + name + "'");
  return it->second;
}

void AnalysisConfig::validate() const {
  if (!(bin_size_meV > 0.0)) throw InvalidInput("config: histogram.bin_size_meV must be > 0");
  if (!(peaks.min_prominence > 0.0) || !(peaks.min_separation_meV > 0.0)) {
    throw InvalidInput("config: peaks.min_prominence and peaks.min_separation_meV must be > 0");
  }
  if (!(peaks.window_half_width_meV > 0.0)) throw InvalidInput("config: peaks.window_half_width_meV must be > 0");
  if (!(odonnell_max_T_qd > 0.0) || !(odonnell_max_T_x0 > 0.0)) {
    throw InvalidInput("config: odonnell temperature limits must be > 0");
  }
  solver.validate();
  for (const auto& [name, m] : materials) {
    if (m.broadening_rate && *m.broadening_rate < 0.0) {
      throw InvalidInput("config: materials." + name + ".broadening_rate must be >= 0");
    }
    if (m.varshni) m.varshni->validate();
    if (m.raman_coefficient && *m.raman_coefficient == 0.0) {
      throw InvalidInput("config: materials." + name + ".raman_coefficient_cm1_per_pct must be non-zero");
    }
  }
}

AnalysisConfig parse_config(const json& j) {
  AnalysisConfig c;
  try {
    check_keys(j, "<root>", {"version", "seed", "relaxation_pct", "materials", "histogram", "solver", "peaks", "odonnell"});
    if (j.value("version", 1) != 1) throw InvalidInput("config: unsupported version");
    c.seed = j.value("seed", std::uint64_t{1});
    c.relaxation_pct = j.value("relaxation_pct", c.relaxation_pct);
    if (j.contains("materials")) {
      for (const auto& [name, m] : j["materials"].items()) c.materials[name] = parse_material(m, name);
    }
    if (j.contains("histogram")) {
      const auto& h = j["histogram"];
      check_keys(h, "histogram", {"bin_size_meV", "weighting"});
      c.bin_size_meV = h.value("bin_size_meV", c.bin_size_meV);
      const auto w = h.value("weighting", std::string("poisson"));
      if (w == "poisson") {
        c.histogram_weighting = HistogramWeighting::poisson;
      } else if (w == "unweighted") {
        c.histogram_weighting = HistogramWeighting::unweighted;
      } else {
        throw InvalidInput("config: histogram.weighting must be 'poisson' or 'unweighted'");
      }
    }
    if (j.contains("solver")) {
      const auto& s = j["solver"];
      check_keys(s, "solver", {"max_iterations", "convergence_tolerance", "initial_damping"});
      c.solver.max_iterations = s.value("max_iterations", c.solver.max_iterations);
      c.solver.convergence_tolerance = s.value("convergence_tolerance", c.solver.convergence_tolerance);
      c.solver.initial_damping = s.value("initial_damping", c.solver.initial_damping);
    }
    if (j.contains("peaks")) {
      const auto& p = j["peaks"];
      check_keys(p, "peaks",
                 {"min_prominence", "min_separation_meV", "window_half_width_meV", "shape", "x0_search_window_meV"});
      c.peaks.min_prominence = p.value("min_prominence", c.peaks.min_prominence);
      c.peaks.min_separation_meV = p.value("min_separation_meV", c.peaks.min_separation_meV);
      c.peaks.window_half_width_meV = p.value("window_half_width_meV", c.peaks.window_half_width_meV);
      c.peaks.shape = line_shape_from_string(p.value("shape", std::string("gaussian")));
      c.peaks.x0_search_window_meV = p.value("x0_search_window_meV", c.peaks.x0_search_window_meV);
    }
    if (j.contains("odonnell")) {
      const auto& o = j["odonnell"];
      check_keys(o, "odonnell", {"max_T_qd_K", "max_T_x0_K"});
      c.odonnell_max_T_qd = o.value("max_T_qd_K", c.odonnell_max_T_qd);
      c.odonnell_max_T_x0 = o.value("max_T_x0_K", c.odonnell_max_T_x0);
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  c.validate();
  c.hash = fnv1a_hex(j.dump());
  return c;
}

AnalysisConfig load_config(const std::filesystem::path& path) {
  return parse_config(parse_json_with_comments(io::read_text_file(path), path.string()));
}

}  // namespace qdstrain
