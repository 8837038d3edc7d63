#include "qdstrain/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qdstrain/constants.hpp"
#include "qdstrain/errors.hpp"

namespace qdstrain {

Spectrum::Spectrum(Eigen::VectorXd energy_meV, Eigen::VectorXd intensity, SpectrumMeta meta)
    : energy_(std::move(energy_meV)), intensity_(std::move(intensity)), meta_(std::move(meta)) {
  if (energy_.size() != intensity_.size()) {
    throw InvalidInput("spectrum: energy grid has " + std::to_string(energy_.size()) + " points but intensity has " +
                       std::to_string(intensity_.size()));
  }
  if (energy_.size() < 2) throw InvalidInput("spectrum: need at least 2 points");
  for (Eigen::Index i = 0; i < energy_.size(); ++i) {
    if (!std::isfinite(energy_[i])) throw InvalidInput("spectrum: non-finite energy at point " + std::to_string(i));
    if (!std::isfinite(intensity_[i]) || intensity_[i] < 0.0) {
      throw InvalidInput("spectrum: negative or non-finite intensity at point " + std::to_string(i));
    }
    if (i > 0 && !(energy_[i] > energy_[i - 1])) {
      throw InvalidInput("spectrum: energy grid not strictly increasing at point " + std::to_string(i));
    }
  }
  if (meta_.resolution_meV && min_spacing() < *meta_.resolution_meV * (1.0 - 1e-9)) {
    throw InvalidInput("spectrum: grid spacing below instrument resolution");
  }
}

Spectrum Spectrum::from_wavelength(const Eigen::VectorXd& wavelength_nm, const Eigen::VectorXd& intensity,
                                   SpectrumMeta meta) {
  if (wavelength_nm.size() != intensity.size()) throw InvalidInput("spectrum: column length mismatch");
  const Eigen::Index n = wavelength_nm.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(wavelength_nm[i] > 0.0)) throw InvalidInput("spectrum: non-positive wavelength at point " + std::to_string(i));
  }
  Eigen::VectorXd e = wavelength_nm.unaryExpr([](double l) { return wavelength_nm_to_meV(l); });
  Eigen::VectorXd y = intensity;
  if (n > 1 && e[0] > e[n - 1]) {
    e.reverseInPlace();
    y.reverseInPlace();
  }
  return Spectrum(std::move(e), std::move(y), std::move(meta));
}

double Spectrum::min_spacing() const {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i < energy_.size(); ++i) best = std::min(best, energy_[i] - energy_[i - 1]);
  return best;
}

Spectrum median_despike(const Spectrum& spectrum, int half_window, double threshold) {
  if (half_window < 1) throw InvalidInput("despike: half_window must be >= 1");
  if (!(threshold > 0.0)) throw InvalidInput("despike: threshold must be > 0");
  const auto& y = spectrum.intensity();
  const Eigen::Index n = y.size();
  Eigen::VectorXd out = y;
  std::vector<double> buf;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, i - half_window);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + half_window);
    buf.assign(y.data() + lo, y.data() + hi + 1);
    auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
    std::nth_element(buf.begin(), mid, buf.end());
    if (y[i] - *mid > threshold) out[i] = *mid;
  }
  return Spectrum(spectrum.energy(), std::move(out), spectrum.meta());
}

}  // namespace qdstrain
