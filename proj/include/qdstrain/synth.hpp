#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qdstrain/ensemble.hpp"
#include "qdstrain/phonon.hpp"
#include "qdstrain/spectrum.hpp"
#include "qdstrain/strain.hpp"

namespace qdstrain {

/// Independent, reproducible random streams derived from one seed. A stream
/// is addressed by (tag, index), so the values a record receives do not
/// depend on the order in which records are generated.
class RandomStreams {
 public:
  explicit RandomStreams(std::uint64_t seed) : seed_(seed) {}

  std::mt19937_64 stream(std::uint64_t tag, std::uint64_t index) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Normal distribution truncated to [lower, upper].
struct StrainDistribution {
  double mean = 0.0;    // %
  double spread = 0.0;  // %, standard deviation before truncation
  double lower = -1.0;
  double upper = 2.0;
};

struct PopulationConfig {
  std::size_t n_locations = 1;
  std::size_t qds_per_location_min = 1;
  std::size_t qds_per_location_max = 1;
  /// When set, QDs are dealt evenly over locations instead of drawn per location.
  std::optional<std::size_t> total_qds;
  StrainDistribution strain;
  double base_energy = 2050.0;  // meV, unstrained QD energy
  double gauge_qd = -149.0;     // meV/%
  double gauge_x0 = -38.2;      // meV/%
  double jitter_sigma = 0.0;    // meV
  /// Extra ensemble FWHM per % tensile strain, added to the jitter.
  double broadening_rate = 0.0;
  double s_ref = 2.29;
  std::optional<double> e_ref;  // meV; defaults to base_energy
  double s_exponent = 1.0;
  double hw_avg = 13.35;  // meV
  std::string location_prefix = "L";
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct QDRecord {
  std::string location_id;
  std::size_t location_index = 0;
  double strain = 0.0;      // %
  double energy = 0.0;      // meV, zero-temperature emission energy
  double huang_rhys = 0.0;  // S
  double hw_avg = 0.0;      // meV
  double intensity = 1.0;   // relative brightness
};

/// energy = base + G_QD * strain + jitter; S = s_ref * (energy / e_ref)^p.
std::vector<QDRecord> generate_population(const PopulationConfig& config);

/// Evenly spaced grid including both ends (up to rounding of the last step).
Eigen::VectorXd uniform_grid(double start, double stop, double step);

struct NoiseModel {
  double additive_sigma = 0.0;  // counts
  bool shot = false;            // Poisson counting noise
};

struct SpectrumSynthConfig {
  NoiseModel noise;
  double line_fwhm = 4.0;       // meV, Gaussian lines
  double peak_counts = 1000.0;  // peak height for intensity 1
  double background = 0.0;      // counts
  double temperature_K = 4.0;
  std::string material;
  std::string sample;
  std::uint64_t seed = 1;
};

struct SynthSpectrum {
  Spectrum spectrum;
  /// Indices of records whose line centre fell outside the grid.
  std::vector<std::size_t> dropped;
};

SynthSpectrum generate_spectrum(std::span<const QDRecord> records, const Eigen::VectorXd& grid,
                                const SpectrumSynthConfig& config);

/// E(T) from the record's (energy, S, <hw>) plus Gaussian noise; E_err = noise.
std::vector<TemperaturePoint> generate_temperature_series(const QDRecord& record, std::span<const double> temps,
                                                          double noise_sigma, std::uint64_t seed);

struct PiezoSweepConfig {
  std::vector<double> fields_kV_cm;
  double blueshift_fraction = 0.86;
  /// Largest X0 shift (meV) at the largest |field|.
  double x0_max_shift = 2.0;
  /// Largest QD blueshift / redshift relative to x0_max_shift.
  double qd_blue_ratio = 1.9;
  double qd_red_ratio = 0.8;
  /// QD magnitudes follow v^skew for stratified v in (0, 1].
  double magnitude_skew = 1.38;
  /// Smallest X0 response relative to the largest one.
  double x0_min_fraction = 0.13;
  double shift_err = 0.1;  // meV, stated per shift
  std::uint64_t seed = 1;

  void validate() const;
};

struct PiezoSweep {
  std::vector<double> fields_kV_cm;
  std::vector<std::vector<ShiftMeasurement>> qd;  // [field][qd]
  std::vector<std::vector<ShiftMeasurement>> x0;  // [field][location]
  std::vector<std::string> x0_locations;
};

/// Linear-in-field shifts for every QD and every location's X0. The number of
/// blueshifting QDs is round(fraction * n); which QDs they are is random.
PiezoSweep generate_piezo_sweep(std::span<const QDRecord> population, const PiezoSweepConfig& config);

/// Broadening rate implied by a sweep configuration, in meV per % strain.
double piezo_truth_broadening_rate(const PiezoSweepConfig& config, double gauge_x0);

struct GaugeCorpusConfig {
  std::size_t n_samples = 6;
  double strain_min = -0.10;  // %
  double strain_max = 0.75;
  double gauge_qd = -149.0;       // meV/%, truth
  double base_energy = 2050.0;    // meV
  double energy_sigma = 15.0;     // meV, ensemble peak scatter
  GaugeFactor gauge_x0{-38.2, 3.82, Species::x0, "WS2"};
  double x0_shift_sigma = 1.0;  // meV, statistical error of the X0 shift
  std::string material = "WS2";
  std::uint64_t seed = 1;
};

/// Per-sample (strain, ensemble peak) pairs. Strains are estimated from a
/// noisy X0 shift through strain_from_shift, so their errors follow the
/// propagated form including the gauge-factor error.
std::vector<GaugeSample> generate_gauge_corpus(const GaugeCorpusConfig& config);

}  // namespace qdstrain
