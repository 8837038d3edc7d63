#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>

#include "command_util.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/io.hpp"
#include "qdstrain/synth.hpp"

namespace qdstrain {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum SectionTag : std::uint64_t {
  kPopulationSeed = 101,
  kRtNoiseSeed = 102,
  kColdNoiseSeed = 103,
  kQdNoiseSeed = 104,
  kRamanNoise = 105,
  kTemperatureSeed = 106,
  kPiezoSeed = 107,
};

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InvalidInput("synth config: '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw InvalidInput("synth config: unknown key '" + where + "." + key + "'");
  }
}

struct SampleSpec {
  std::string name;
  std::string material;
  PopulationConfig population;
  double x0_reference = 2010.0;  // meV, unstrained X0 at room temperature
  double x0_reference_err = 0.0;
  double relaxation = 0.0;  // %, 4 K strain minus room-temperature strain
};

struct SpectraSpec {
  bool enabled = false;
  double step = 0.125;
  double below = 80.0, above = 40.0;  // meV around the line(s)
  SpectrumSynthConfig synth;
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::vector<SampleSpec> samples;
  SpectraSpec rt, cold, qd;
  std::optional<VarshniParams> varshni;
  std::optional<double> raman_coefficient;
  double raman_noise = 0.0;
  json temperature;
  json piezo;
};

SpectraSpec parse_spectra(const json& j, const std::string& where, double temperature) {
  check_keys(j, where, {"step_meV", "below_meV", "above_meV", "line_fwhm_meV", "peak_counts", "background",
                        "noise_sigma", "shot_noise"});
  SpectraSpec s;
  s.enabled = true;
  s.step = j.value("step_meV", s.step);
  s.below = j.value("below_meV", s.below);
  s.above = j.value("above_meV", s.above);
  s.synth.line_fwhm = j.value("line_fwhm_meV", s.synth.line_fwhm);
  s.synth.peak_counts = j.value("peak_counts", s.synth.peak_counts);
  s.synth.background = j.value("background", s.synth.background);
  s.synth.noise.additive_sigma = j.value("noise_sigma", 0.0);
  s.synth.noise.shot = j.value("shot_noise", false);
  s.synth.temperature_K = temperature;
  if (!(s.step > 0.0) || s.below < 0.0 || s.above < 0.0) throw InvalidInput("synth config: bad grid in '" + where + "'");
  return s;
}

GeneratorConfig parse_generator(const json& j, const AnalysisConfig& cfg) {
  check_keys(j, "<root>", {"seed", "samples", "rt_spectra", "cold_spectra", "qd_spectra", "varshni", "raman",
                           "temperature", "piezo"});
  GeneratorConfig g;
  g.seed = j.value("seed", cfg.seed);
  if (!j.contains("samples") || !j["samples"].is_array() || j["samples"].empty()) {
    throw InvalidInput("synth config: 'samples' must be a non-empty array");
  }
  std::set<std::string> names;
  for (const auto& s : j["samples"]) {
    check_keys(s, "samples[]", {"name", "material", "n_locations", "qds_per_location", "total_qds", "strain",
                                "base_energy_meV", "gauge_qd", "gauge_x0", "jitter_sigma_meV", "broadening_rate",
                                "s_ref", "e_ref_meV", "s_exponent", "hw_avg_meV", "x0_reference_meV",
                                "x0_reference_err_meV", "relaxation_pct"});
    SampleSpec spec;
    spec.name = s.at("name").get<std::string>();
    if (!names.insert(spec.name).second) throw InvalidInput("synth config: duplicate sample '" + spec.name + "'");
    spec.material = s.value("material", std::string("WS2"));
    const auto mc = cfg.materials.find(spec.material);
    auto& p = spec.population;
    p.n_locations = s.value("n_locations", std::size_t{10});
    if (s.contains("qds_per_location")) {
      const auto& q = s["qds_per_location"];
      if (!q.is_array() || q.size() != 2) throw InvalidInput("synth config: qds_per_location must be [min, max]");
      p.qds_per_location_min = q[0].get<std::size_t>();
      p.qds_per_location_max = q[1].get<std::size_t>();
    } else {
      p.qds_per_location_min = 3;
      p.qds_per_location_max = 8;
    }
    if (s.contains("total_qds")) p.total_qds = s["total_qds"].get<std::size_t>();
    if (s.contains("strain")) {
      const auto& d = s["strain"];
      check_keys(d, "samples[].strain", {"mean", "spread", "lower", "upper"});
      p.strain.mean = d.value("mean", 0.4);
      p.strain.spread = d.value("spread", 0.15);
      p.strain.lower = d.value("lower", -0.1);
      p.strain.upper = d.value("upper", 0.8);
    } else {
      p.strain = {0.4, 0.15, -0.1, 0.8};
    }
    p.base_energy = s.value("base_energy_meV", 2000.0);
    const bool has_qd = mc != cfg.materials.end() && mc->second.gauge_qd;
    const bool has_x0 = mc != cfg.materials.end() && mc->second.gauge_x0;
    p.gauge_qd = s.value("gauge_qd", has_qd ? mc->second.gauge_qd->value : -149.0);
    p.gauge_x0 = s.value("gauge_x0", has_x0 ? mc->second.gauge_x0->value : -38.2);
    p.jitter_sigma = s.value("jitter_sigma_meV", 20.0);
    p.broadening_rate = s.value("broadening_rate", 0.0);
    p.s_ref = s.value("s_ref", p.s_ref);
    if (s.contains("e_ref_meV")) p.e_ref = s["e_ref_meV"].get<double>();
    p.s_exponent = s.value("s_exponent", p.s_exponent);
    p.hw_avg = s.value("hw_avg_meV", p.hw_avg);
    p.location_prefix = spec.name + "-L";
    p.validate();
    spec.x0_reference = s.value("x0_reference_meV", spec.x0_reference);
    spec.x0_reference_err = s.value("x0_reference_err_meV", 0.0);
    spec.relaxation = s.value("relaxation_pct", cfg.relaxation_pct);
    g.samples.push_back(std::move(spec));
  }
  if (j.contains("rt_spectra")) g.rt = parse_spectra(j["rt_spectra"], "rt_spectra", 296.0);
  if (j.contains("cold_spectra")) g.cold = parse_spectra(j["cold_spectra"], "cold_spectra", 4.0);
  if (j.contains("qd_spectra")) g.qd = parse_spectra(j["qd_spectra"], "qd_spectra", 4.0);
  if (j.contains("varshni")) {
    const auto& v = j["varshni"];
    check_keys(v, "varshni", {"E0_meV", "alpha_meV_per_K", "beta_K"});
    g.varshni = VarshniParams{v.at("E0_meV").get<double>(), v.at("alpha_meV_per_K").get<double>(),
                              v.at("beta_K").get<double>()};
    g.varshni->validate();
  }
  if (g.cold.enabled && !g.varshni) throw InvalidInput("synth config: cold_spectra needs 'varshni'");
  if (j.contains("raman")) {
    const auto& r = j["raman"];
    check_keys(r, "raman", {"coefficient_cm1_per_pct", "noise_cm1"});
    g.raman_coefficient = r.at("coefficient_cm1_per_pct").get<double>();
    g.raman_noise = r.value("noise_cm1", 0.0);
    if (*g.raman_coefficient == 0.0) throw InvalidInput("synth config: raman coefficient must be non-zero");
  }
  if (j.contains("temperature")) {
    g.temperature = j["temperature"];
    check_keys(g.temperature, "temperature", {"sample", "n_qd", "temperatures_K", "noise_meV", "x0"});
  }
  if (j.contains("piezo")) {
    g.piezo = j["piezo"];
    check_keys(g.piezo, "piezo", {"sample", "fields_kV_cm", "blueshift_fraction", "x0_max_shift_meV", "qd_blue_ratio",
                                  "qd_red_ratio", "magnitude_skew", "x0_min_fraction", "shift_err_meV"});
  }
  return g;
}

const SampleSpec& find_sample(const GeneratorConfig& g, const json& section, const std::string& where) {
  if (!section.contains("sample")) return g.samples.front();
  const auto name = section["sample"].get<std::string>();
  for (const auto& s : g.samples) {
    if (s.name == name) return s;
  }
  throw InvalidInput("synth config: " + where + ".sample '" + name + "' is not a sample");
}

std::size_t index_of(const GeneratorConfig& g, const SampleSpec& s) {
  return static_cast<std::size_t>(&s - g.samples.data());
}

struct Writer {
  fs::path root;
  std::vector<std::string> files;

  void text(const std::string& rel, const std::string& content) {
    io::write_text_file(root / rel, content);
    files.push_back(rel);
  }
  void spectrum(const std::string& rel, const Spectrum& s) {
    io::write_spectrum_csv(root / rel, s);
    files.push_back(rel);
    files.push_back(io::sidecar_path(fs::path(rel)).generic_string());
  }
};

}  // namespace

int cmd_synth(const GlobalOptions& global, const SynthOptions& options, std::ostream& log) {
  const auto cfg = resolve_config(global);
  const json raw = parse_json_with_comments(io::read_text_file(options.generator_config),
                                            options.generator_config.string());
  GeneratorConfig g;
  try {
    g = parse_generator(raw, cfg);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("synth config: ") + e.what());
  }
  if (global.seed) g.seed = *global.seed;
  const RandomStreams streams(g.seed);
  auto sub_seed = [&](SectionTag tag, std::uint64_t index) { return streams.stream(tag, index)(); };

  Writer out{global.output_dir, {}};
  json truth_samples = json::array();
  std::vector<std::vector<QDRecord>> populations;
  std::vector<io::QdEnergyRow> energies;
  std::string references = "location_id,reference_meV,reference_err_meV\n";
  std::string raman = "location_id,raman_shift_cm1,raman_shift_err_cm1\n";

  for (std::size_t si = 0; si < g.samples.size(); ++si) {
    const auto& spec = g.samples[si];
    auto pc = spec.population;
    pc.rng_seed = sub_seed(kPopulationSeed, si);
    auto pop = generate_population(pc);
    for (const auto& r : pop) energies.push_back({spec.name, spec.material, r.location_id, r.energy});

    std::vector<double> e;
    for (const auto& r : pop) e.push_back(r.energy);
    const auto hist = build_histogram(e, cfg.bin_size_meV);
    std::string hcsv = "bin_low_meV,bin_high_meV,count\n";
    for (std::size_t k = 0; k < hist.counts.size(); ++k) {
      hcsv += io::format_energy(hist.edges[k]) + "," + io::format_energy(hist.edges[k + 1]) + "," +
              std::to_string(hist.counts[k]) + "\n";
    }
    out.text("histogram_" + spec.name + ".csv", hcsv);

    // Per-location truth; the population strain is the 4 K value.
    json locations = json::array();
    double strain_sum = 0.0;
    std::size_t n_loc = 0;
    std::vector<QDRecord> by_location;
    for (std::size_t k = 0; k < pop.size(); ++k) {
      if (k > 0 && pop[k].location_index == pop[k - 1].location_index) continue;
      by_location.push_back(pop[k]);
    }
    for (std::size_t li = 0; li < by_location.size(); ++li) {
      const auto& loc = by_location[li];
      const double eps_cold = loc.strain, eps_rt = loc.strain - spec.relaxation;
      const double x0_rt = spec.x0_reference + pc.gauge_x0 * eps_rt;
      json lj = {{"location_id", loc.location_id}, {"strain_4K_pct", eps_cold}, {"strain_rt_pct", eps_rt},
                 {"x0_rt_meV", x0_rt}};
      references += loc.location_id + "," + io::format_energy(spec.x0_reference) + "," +
                    io::format_energy(spec.x0_reference_err) + "\n";
      strain_sum += eps_rt;
      ++n_loc;

      const auto file = spec.name + "_" + loc.location_id + ".csv";
      auto line = [&](double energy) {
        QDRecord r = loc;
        r.energy = energy;
        r.intensity = 1.0;
        return std::vector<QDRecord>{r};
      };
      if (g.rt.enabled) {
        auto sc = g.rt.synth;
        sc.material = spec.material;
        sc.sample = spec.name;
        sc.seed = sub_seed(kRtNoiseSeed, si * 100000 + li);
        const auto grid = uniform_grid(spec.x0_reference - g.rt.below, spec.x0_reference + g.rt.above, g.rt.step);
        out.spectrum("rt_spectra/" + file, generate_spectrum(line(x0_rt), grid, sc).spectrum);
      }
      if (g.cold.enabled) {
        const double cold_ref = spec.x0_reference + varshni_shift(*g.varshni, 296.0, 4.0);
        const double x0_cold = cold_ref + pc.gauge_x0 * eps_cold;
        lj["x0_4K_meV"] = x0_cold;
        auto sc = g.cold.synth;
        sc.material = spec.material;
        sc.sample = spec.name;
        sc.seed = sub_seed(kColdNoiseSeed, si * 100000 + li);
        const auto grid = uniform_grid(cold_ref - g.cold.below, cold_ref + g.cold.above, g.cold.step);
        out.spectrum("cold_spectra/" + file, generate_spectrum(line(x0_cold), grid, sc).spectrum);
      }
      if (g.qd.enabled) {
        std::vector<QDRecord> lines;
        for (const auto& r : pop) {
          if (r.location_index == loc.location_index) lines.push_back(r);
        }
        double lo = lines.front().energy, hi = lo;
        for (const auto& r : lines) {
          lo = std::min(lo, r.energy);
          hi = std::max(hi, r.energy);
        }
        auto sc = g.qd.synth;
        sc.material = spec.material;
        sc.sample = spec.name;
        sc.seed = sub_seed(kQdNoiseSeed, si * 100000 + li);
        const auto grid = uniform_grid(std::floor(lo - g.qd.below), std::ceil(hi + g.qd.above), g.qd.step);
        out.spectrum("qd_spectra/" + file, generate_spectrum(lines, grid, sc).spectrum);
      }
      if (g.raman_coefficient) {
        auto rng = streams.stream(kRamanNoise, si * 100000 + li);
        std::normal_distribution<double> noise(0.0, 1.0);
        const double shift = *g.raman_coefficient * eps_rt + g.raman_noise * noise(rng);
        raman += loc.location_id + "," + io::format_number(shift) + "," + io::format_number(g.raman_noise) + "\n";
        lj["raman_shift_cm1"] = shift;
      }
      locations.push_back(lj);
    }
    truth_samples.push_back({{"name", spec.name}, {"material", spec.material}, {"n_qd", pop.size()},
                             {"n_locations", n_loc}, {"gauge_qd", pc.gauge_qd}, {"gauge_x0", pc.gauge_x0},
                             {"x0_reference_meV", spec.x0_reference}, {"relaxation_pct", spec.relaxation},
                             {"mean_strain_rt_pct", strain_sum / static_cast<double>(n_loc)},
                             {"mean_strain_4K_pct", strain_sum / static_cast<double>(n_loc) + spec.relaxation},
                             {"locations", locations}});
    populations.push_back(std::move(pop));
  }

  io::write_qd_energies(out.root / "qd_energies.csv", energies);
  out.files.push_back("qd_energies.csv");
  out.text("references.csv", references);
  if (g.raman_coefficient) out.text("raman.csv", raman);

  json truth = {{"seed", g.seed}, {"samples", truth_samples}};

  if (!g.temperature.is_null()) {
    const auto& t = g.temperature;
    const auto& spec = find_sample(g, t, "temperature");
    const auto& pop = populations[index_of(g, spec)];
    std::vector<double> temps = t.value("temperatures_K", std::vector<double>{});
    if (temps.empty()) {
      for (double T = 4.0; T <= 94.0; T += 6.0) temps.push_back(T);
    }
    const double noise = t.value("noise_meV", 0.0);
    const std::size_t n = std::min(t.value("n_qd", std::size_t{8}), pop.size());
    std::vector<std::size_t> order(pop.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pop[a].energy < pop[b].energy; });

    std::vector<std::pair<std::string, std::vector<TemperaturePoint>>> series;
    json emitters = json::array();
    for (std::size_t k = 0; k < n; ++k) {
      // Evenly spread over the energy-sorted population.
      const std::size_t pick = n > 1 ? order[k * (order.size() - 1) / (n - 1)] : order[order.size() / 2];
      const auto& r = pop[pick];
      const auto name = "QD" + std::to_string(k + 1);
      series.emplace_back(name, generate_temperature_series(r, temps, noise, sub_seed(kTemperatureSeed, k)));
      emitters.push_back({{"emitter", name}, {"E0_meV", r.energy}, {"S", r.huang_rhys}, {"hw_avg_meV", r.hw_avg}});
    }
    if (t.contains("x0")) {
      const auto& x = t["x0"];
      check_keys(x, "temperature.x0", {"E0_meV", "S", "hw_avg_meV"});
      QDRecord r;
      r.location_id = "X0";
      r.energy = x.at("E0_meV").get<double>();
      r.huang_rhys = x.at("S").get<double>();
      r.hw_avg = x.at("hw_avg_meV").get<double>();
      series.emplace_back("X0", generate_temperature_series(r, temps, noise, sub_seed(kTemperatureSeed, 1000000)));
      emitters.push_back({{"emitter", "X0"}, {"E0_meV", r.energy}, {"S", r.huang_rhys}, {"hw_avg_meV", r.hw_avg}});
    }
    io::write_temperature_csv(out.root / "temperature_series.csv", series);
    out.files.push_back("temperature_series.csv");
    truth["temperature"] = {{"sample", spec.name}, {"noise_meV", noise}, {"emitters", emitters}};
  }

  if (!g.piezo.is_null()) {
    const auto& p = g.piezo;
    const auto& spec = find_sample(g, p, "piezo");
    PiezoSweepConfig pc;
    pc.fields_kV_cm = p.value("fields_kV_cm", std::vector<double>{-15.0, -7.5, 0.0, 7.5, 15.0});
    pc.blueshift_fraction = p.value("blueshift_fraction", pc.blueshift_fraction);
    pc.x0_max_shift = p.value("x0_max_shift_meV", pc.x0_max_shift);
    pc.qd_blue_ratio = p.value("qd_blue_ratio", pc.qd_blue_ratio);
    pc.qd_red_ratio = p.value("qd_red_ratio", pc.qd_red_ratio);
    pc.magnitude_skew = p.value("magnitude_skew", pc.magnitude_skew);
    pc.x0_min_fraction = p.value("x0_min_fraction", pc.x0_min_fraction);
    pc.shift_err = p.value("shift_err_meV", pc.shift_err);
    pc.seed = sub_seed(kPiezoSeed, 0);
    const auto sweep = generate_piezo_sweep(populations[index_of(g, spec)], pc);
    std::vector<io::ShiftRow> rows;
    for (std::size_t f = 0; f < sweep.fields_kV_cm.size(); ++f) {
      for (const auto& s : sweep.qd[f]) rows.push_back({sweep.fields_kV_cm[f], Species::qd, s});
      for (const auto& s : sweep.x0[f]) rows.push_back({sweep.fields_kV_cm[f], Species::x0, s});
    }
    io::write_shift_table(out.root / "piezo_shifts.csv", rows);
    out.files.push_back("piezo_shifts.csv");
    truth["piezo"] = {{"sample", spec.name},
                      {"blueshift_fraction", pc.blueshift_fraction},
                      {"x0_max_shift_meV", pc.x0_max_shift},
                      {"broadening_rate_meV_per_pct", piezo_truth_broadening_rate(pc, spec.population.gauge_x0)}};
  }

  out.text("truth.json", truth.dump(2) + "\n");

  std::sort(out.files.begin(), out.files.end());
  json files = json::array();
  for (const auto& f : out.files) files.push_back({{"path", f}, {"digest", file_digest(out.root / f)}});
  const json manifest = {{"version", kToolVersion}, {"seed", g.seed}, {"config_hash", fnv1a_hex(raw.dump())},
                         {"analysis_config_hash", cfg.hash}, {"files", files}};
  io::write_text_file(out.root / "manifest.json", manifest.dump(2) + "\n");
  log << "synth: " << out.files.size() << " files, seed " << g.seed << "\n";
  return kExitOk;
}

}  // namespace qdstrain
