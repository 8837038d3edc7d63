#include "qdstrain/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qdstrain/constants.hpp"
#include "qdstrain/errors.hpp"

namespace qdstrain {
namespace {

enum StreamTag : std::uint64_t {
  kLocationStrain = 1,
  kQdJitter = 2,
  kSpectrumNoise = 3,
  kPiezoSigns = 4,
  kPiezoMagnitude = 5,
  kPiezoX0 = 6,
  kTemperatureNoise = 7,
  kGaugeCorpus = 8,
  kLocationCount = 9,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double truncated_normal(std::mt19937_64& rng, const StrainDistribution& d) {
  if (d.spread == 0.0) return std::clamp(d.mean, d.lower, d.upper);
  std::normal_distribution<double> normal(d.mean, d.spread);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double v = normal(rng);
    if (v >= d.lower && v <= d.upper) return v;
  }
  return std::clamp(d.mean, d.lower, d.upper);
}

}  // namespace

std::mt19937_64 RandomStreams::stream(std::uint64_t tag, std::uint64_t index) const {
  const std::uint64_t a = splitmix64(seed_ ^ splitmix64(tag));
  const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

void PopulationConfig::validate() const {
  if (n_locations < 1) throw InvalidInput("population: n_locations must be >= 1");
  if (!total_qds && (qds_per_location_min < 1 || qds_per_location_max < qds_per_location_min)) {
    throw InvalidInput("population: invalid qds_per_location range");
  }
  if (total_qds && *total_qds < 1) throw InvalidInput("population: total_qds must be >= 1");
  if (!(jitter_sigma >= 0.0)) throw InvalidInput("population: jitter_sigma must be >= 0");
  if (!(broadening_rate >= 0.0)) throw InvalidInput("population: broadening_rate must be >= 0");
  if (!(strain.spread >= 0.0) || strain.lower > strain.upper) throw InvalidInput("population: invalid strain distribution");
  if (!(s_ref >= 0.0) || !(s_exponent > 0.0)) throw InvalidInput("population: s_ref >= 0 and s_exponent > 0 required");
  if (!(hw_avg > 0.0)) throw InvalidInput("population: hw_avg must be > 0");
  if (e_ref && !(*e_ref > 0.0)) throw InvalidInput("population: e_ref must be > 0");
}

std::vector<QDRecord> generate_population(const PopulationConfig& config) {
  config.validate();
  const RandomStreams streams(config.rng_seed);
  const double e_ref = config.e_ref.value_or(config.base_energy);

  std::vector<std::size_t> per_location(config.n_locations);
  for (std::size_t l = 0; l < config.n_locations; ++l) {
    if (config.total_qds) {
      per_location[l] = *config.total_qds / config.n_locations + (l < *config.total_qds % config.n_locations ? 1 : 0);
    } else {
      auto rng = streams.stream(kLocationCount, l);
      std::uniform_int_distribution<std::size_t> count(config.qds_per_location_min, config.qds_per_location_max);
      per_location[l] = count(rng);
    }
  }

  std::vector<QDRecord> records;
  std::size_t index = 0;
  for (std::size_t l = 0; l < config.n_locations; ++l) {
    auto loc_rng = streams.stream(kLocationStrain, l);
    const double strain = truncated_normal(loc_rng, config.strain);
    const double sigma = config.jitter_sigma + config.broadening_rate * std::max(strain, 0.0) / kFwhmPerSigma;
    for (std::size_t q = 0; q < per_location[l]; ++q, ++index) {
      auto rng = streams.stream(kQdJitter, index);
      std::normal_distribution<double> jitter(0.0, 1.0);
      std::uniform_real_distribution<double> brightness(0.5, 1.5);
      QDRecord r;
      r.location_index = l;
      r.location_id = config.location_prefix + std::to_string(l + 1);
      r.strain = strain;
      r.energy = config.base_energy + config.gauge_qd * strain + sigma * jitter(rng);
      r.intensity = brightness(rng);
      if (!(r.energy > 0.0)) throw InvalidInput("population: configuration produced a non-positive energy");
      r.huang_rhys = config.s_ref * std::pow(r.energy / e_ref, config.s_exponent);
      r.hw_avg = config.hw_avg;
      records.push_back(std::move(r));
    }
  }
  return records;
}

Eigen::VectorXd uniform_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop > start)) throw InvalidInput("uniform_grid: need start < stop and step > 0");
  const auto n = static_cast<Eigen::Index>(std::floor((stop - start) / step + 1e-9)) + 1;
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) g[i] = start + static_cast<double>(i) * step;
  return g;
}

SynthSpectrum generate_spectrum(std::span<const QDRecord> records, const Eigen::VectorXd& grid,
                                const SpectrumSynthConfig& config) {
  if (!(config.line_fwhm > 0.0)) throw InvalidInput("generate_spectrum: line_fwhm must be > 0");
  if (grid.size() < 2) throw InvalidInput("generate_spectrum: grid too short");
  const double sigma = config.line_fwhm / kFwhmPerSigma;
  Eigen::VectorXd y = Eigen::VectorXd::Constant(grid.size(), config.background);
  std::vector<std::size_t> dropped;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    if (r.energy < grid[0] || r.energy > grid[grid.size() - 1]) {
      dropped.push_back(k);
      continue;
    }
    const double height = config.peak_counts * r.intensity;
    y += (((grid.array() - r.energy) / sigma).square() * -0.5).exp().matrix() * height;
  }

  if (config.noise.shot || config.noise.additive_sigma > 0.0) {
    auto rng = RandomStreams(config.seed).stream(kSpectrumNoise, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (config.noise.shot) {
        std::poisson_distribution<long> poisson(std::max(y[i], 0.0));
        y[i] = y[i] > 0.0 ? static_cast<double>(poisson(rng)) : 0.0;
      }
      if (config.noise.additive_sigma > 0.0) y[i] += config.noise.additive_sigma * normal(rng);
      y[i] = std::max(y[i], 0.0);
    }
  }

  SpectrumMeta meta;
  meta.temperature_K = config.temperature_K;
  meta.material = config.material;
  meta.sample = config.sample;
  if (!records.empty()) meta.location_id = records.front().location_id;
  return {Spectrum(grid, std::move(y), std::move(meta)), std::move(dropped)};
}

std::vector<TemperaturePoint> generate_temperature_series(const QDRecord& record, std::span<const double> temps,
                                                          double noise_sigma, std::uint64_t seed) {
  if (temps.empty()) throw InvalidInput("generate_temperature_series: no temperatures");
  if (!(noise_sigma >= 0.0)) throw InvalidInput("generate_temperature_series: negative noise");
  auto rng = RandomStreams(seed).stream(kTemperatureNoise, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<TemperaturePoint> out;
  out.reserve(temps.size());
  for (double t : temps) {
    if (t < 0.0) throw InvalidInput("generate_temperature_series: negative temperature");
    const double e = odonnell_energy(record.energy, record.huang_rhys, record.hw_avg, t);
    const double noise = noise_sigma > 0.0 ? noise_sigma * normal(rng) : 0.0;
    out.push_back({t, e + noise, noise_sigma});
  }
  return out;
}

void PiezoSweepConfig::validate() const {
  if (!(blueshift_fraction >= 0.0 && blueshift_fraction <= 1.0)) {
    throw InvalidInput("piezo: blueshift_fraction must lie in [0, 1]");
  }
  if (!(x0_max_shift >= 0.0) || !(qd_blue_ratio >= 0.0) || !(qd_red_ratio >= 0.0)) {
    throw InvalidInput("piezo: shift scales must be >= 0");
  }
  if (!(magnitude_skew > 0.0)) throw InvalidInput("piezo: magnitude_skew must be > 0");
  if (!(x0_min_fraction >= 0.0 && x0_min_fraction <= 1.0)) throw InvalidInput("piezo: x0_min_fraction in [0, 1]");
  if (!(shift_err >= 0.0)) throw InvalidInput("piezo: shift_err must be >= 0");
}

PiezoSweep generate_piezo_sweep(std::span<const QDRecord> population, const PiezoSweepConfig& config) {
  config.validate();
  const RandomStreams streams(config.seed);
  const std::size_t n = population.size();

  // Exactly round(f * n) blueshifting QDs, placed by a seeded permutation.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto sign_rng = streams.stream(kPiezoSigns, 0);
  std::shuffle(order.begin(), order.end(), sign_rng);
  const auto n_blue = static_cast<std::size_t>(std::lround(config.blueshift_fraction * static_cast<double>(n)));
  std::vector<int> sign(n, -1);
  for (std::size_t k = 0; k < n_blue; ++k) sign[order[k]] = +1;

  // Stratified magnitudes within each sign group: the k-th QD of a group of
  // size m draws v from ((k + U) / m), so the extremes of the group are sampled.
  std::vector<double> magnitude(n, 0.0);
  for (int s : {+1, -1}) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < n; ++i) {
      if (sign[i] == s) group.push_back(i);
    }
    auto strata_rng = streams.stream(kPiezoMagnitude, s > 0 ? 0 : 1);
    std::vector<std::size_t> strata(group.size());
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), strata_rng);
    const double scale = config.x0_max_shift * (s > 0 ? config.qd_blue_ratio : config.qd_red_ratio);
    for (std::size_t k = 0; k < group.size(); ++k) {
      auto rng = streams.stream(kPiezoMagnitude, 2 + group[k]);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double v = (static_cast<double>(strata[k]) + 1.0 - unit(rng)) / static_cast<double>(group.size());
      magnitude[group[k]] = scale * std::pow(v, config.magnitude_skew);
    }
  }

  // X0 response per location, normalised so the strongest location reaches x0_max_shift.
  std::vector<std::string> locations;
  std::vector<std::size_t> loc_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = std::find(locations.begin(), locations.end(), population[i].location_id);
    if (it == locations.end()) {
      locations.push_back(population[i].location_id);
      loc_of[i] = locations.size() - 1;
    } else {
      loc_of[i] = static_cast<std::size_t>(it - locations.begin());
    }
  }
  // Stratified over [x0_min_fraction, 1] like the QD magnitudes.
  std::vector<double> x0_response(locations.size());
  std::vector<std::size_t> x0_strata(locations.size());
  std::iota(x0_strata.begin(), x0_strata.end(), 0);
  auto x0_strata_rng = streams.stream(kPiezoX0, 0);
  std::shuffle(x0_strata.begin(), x0_strata.end(), x0_strata_rng);
  for (std::size_t l = 0; l < locations.size(); ++l) {
    auto rng = streams.stream(kPiezoX0, 1 + l);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double v = (static_cast<double>(x0_strata[l]) + 1.0 - unit(rng)) / static_cast<double>(locations.size());
    x0_response[l] = config.x0_min_fraction + (1.0 - config.x0_min_fraction) * v;
  }
  if (!x0_response.empty()) {
    const double top = *std::max_element(x0_response.begin(), x0_response.end());
    for (auto& u : x0_response) u /= top;
  }

  double f_max = 0.0;
  for (double f : config.fields_kV_cm) f_max = std::max(f_max, std::abs(f));

  PiezoSweep sweep;
  sweep.fields_kV_cm = config.fields_kV_cm;
  sweep.x0_locations = locations;
  for (double f : config.fields_kV_cm) {
    const double scale = f_max > 0.0 ? f / f_max : 0.0;
    std::vector<ShiftMeasurement> qd(n);
    for (std::size_t i = 0; i < n; ++i) {
      qd[i].delta_E = scale * sign[i] * magnitude[i];
      qd[i].delta_E_err = config.shift_err;
      qd[i].weight = population[i].intensity;
      qd[i].context = population[i].location_id;
    }
    std::vector<ShiftMeasurement> x0(locations.size());
    for (std::size_t l = 0; l < locations.size(); ++l) {
      x0[l].delta_E = scale * config.x0_max_shift * x0_response[l];
      x0[l].delta_E_err = config.shift_err;
      x0[l].weight = 1.0;
      x0[l].context = locations[l];
    }
    sweep.qd.push_back(std::move(qd));
    sweep.x0.push_back(std::move(x0));
  }
  return sweep;
}

double piezo_truth_broadening_rate(const PiezoSweepConfig& config, double gauge_x0) {
  if (gauge_x0 == 0.0) throw InvalidInput("piezo: zero X0 gauge factor");
  return (config.qd_blue_ratio + config.qd_red_ratio) * std::abs(gauge_x0);
}

std::vector<GaugeSample> generate_gauge_corpus(const GaugeCorpusConfig& config) {
  if (config.n_samples < 2) throw InvalidInput("gauge corpus: need at least 2 samples");
  config.gauge_x0.validate();
  const RandomStreams streams(config.seed);
  std::vector<GaugeSample> out;
  for (std::size_t s = 0; s < config.n_samples; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(config.n_samples - 1);
    const double strain = config.strain_min + t * (config.strain_max - config.strain_min);
    auto rng = streams.stream(kGaugeCorpus, s);
    std::normal_distribution<double> normal(0.0, 1.0);
    ShiftMeasurement x0;
    x0.delta_E = config.gauge_x0.value * strain + config.x0_shift_sigma * normal(rng);
    x0.delta_E_err = config.x0_shift_sigma;
    GaugeSample g;
    g.strain = strain_from_shift(x0, config.gauge_x0);
    g.peak_energy = config.base_energy + config.gauge_qd * strain + config.energy_sigma * normal(rng);
    g.energy_err = config.energy_sigma;
    out.push_back(g);
  }
  return out;
}

}  // namespace qdstrain
