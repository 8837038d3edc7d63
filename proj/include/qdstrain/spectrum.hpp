#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace qdstrain {

struct SpectrumMeta {
  double temperature_K = 0.0;
  std::string location_id;
  std::string sample;
  std::string material;
  std::optional<double> piezo_field_kV_cm;
  /// Instrument resolution; when set, the grid spacing may not be finer.
  std::optional<double> resolution_meV;
};

/// An energy-resolved intensity trace on a strictly increasing meV grid.
///
/// Construction validates the grid and intensities and throws InvalidInput
/// naming the first offending point index.
class Spectrum {
 public:
  Spectrum(Eigen::VectorXd energy_meV, Eigen::VectorXd intensity, SpectrumMeta meta = {});

  /// Converts a wavelength grid (nm) to meV and reorders to increasing energy.
  static Spectrum from_wavelength(const Eigen::VectorXd& wavelength_nm, const Eigen::VectorXd& intensity,
                                  SpectrumMeta meta = {});

  const Eigen::VectorXd& energy() const { return energy_; }
  const Eigen::VectorXd& intensity() const { return intensity_; }
  const SpectrumMeta& meta() const { return meta_; }
  Eigen::Index size() const { return energy_.size(); }

  double min_spacing() const;

 private:
  Eigen::VectorXd energy_;
  Eigen::VectorXd intensity_;
  SpectrumMeta meta_;
};

/// Replaces isolated spikes by the running median: a point is a spike when it
/// exceeds the median of its (2*half_window+1) neighbourhood by more than
/// `threshold` counts.
Spectrum median_despike(const Spectrum& spectrum, int half_window, double threshold);

}  // namespace qdstrain
