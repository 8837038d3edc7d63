#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdstrain/nlls.hpp"
#include "qdstrain/regression.hpp"
#include "qdstrain/strain.hpp"

namespace qdstrain {

struct HistogramGaussian {
  double peak_energy = 0.0;  // meV
  double peak_energy_err = 0.0;
  double fwhm = 0.0;  // meV
  double fwhm_err = 0.0;
  double amplitude = 0.0;  // counts at the peak
  /// Covariance of (center, sigma, amplitude).
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  bool converged = true;
};

/// Histogram of emission energies with half-open bins
/// [origin + k*bin_size, origin + (k+1)*bin_size).
struct EnsembleStats {
  double bin_size = 0.0;
  double origin = 0.0;
  std::vector<double> edges;  // counts.size() + 1 entries
  std::vector<long> counts;
  std::size_t out_of_range = 0;
  std::optional<HistogramGaussian> gauss;

  double bin_center(std::size_t k) const { return origin + (static_cast<double>(k) + 0.5) * bin_size; }
  long total() const;
};

/// Without an explicit origin the first edge is the minimum energy floored to
/// a multiple of bin_size. Energies below an explicit origin are counted in
/// out_of_range.
EnsembleStats build_histogram(std::span<const double> energies, double bin_size,
                              std::optional<double> origin = std::nullopt);

enum class HistogramWeighting {
  /// Residuals divided by sqrt(max(count, 1)).
  poisson,
  unweighted,
};

/// Gaussian A exp(-(x - c)^2 / 2 s^2) evaluated at bin centres, residuals
/// scaled per bin. Parameters: [c, s, A].
template <typename Scalar_ = double>
class HistogramGaussianModel {
 public:
  using Scalar = Scalar_;

  HistogramGaussianModel(VectorX<Scalar> centers, VectorX<Scalar> counts, VectorX<Scalar> inv_sigma)
      : x_(std::move(centers)), y_(std::move(counts)), w_(std::move(inv_sigma)) {}

  Eigen::Index parameter_count() const { return 3; }
  Eigen::Index residual_count() const { return x_.size(); }

  VectorX<Scalar> residuals(const VectorX<Scalar>& p) const {
    VectorX<Scalar> r(x_.size());
    for (Eigen::Index i = 0; i < x_.size(); ++i) {
      const Scalar u = (x_[i] - p[0]) / p[1];
      r[i] = w_[i] * (p[2] * std::exp(Scalar(-0.5) * u * u) - y_[i]);
    }
    return r;
  }

  MatrixX<Scalar> jacobian(const VectorX<Scalar>& p) const {
    MatrixX<Scalar> j(x_.size(), 3);
    for (Eigen::Index i = 0; i < x_.size(); ++i) {
      const Scalar u = (x_[i] - p[0]) / p[1];
      const Scalar g = std::exp(Scalar(-0.5) * u * u);
      j(i, 0) = w_[i] * p[2] * g * u / p[1];
      j(i, 1) = w_[i] * p[2] * g * u * u / p[1];
      j(i, 2) = w_[i] * g;
    }
    return j;
  }

 private:
  VectorX<Scalar> x_;
  VectorX<Scalar> y_;
  VectorX<Scalar> w_;
};

/// Fits a Gaussian to the bin counts; needs at least 4 non-empty bins.
EnsembleStats fit_gaussian_histogram(EnsembleStats stats, const SolverConfig& config = {},
                                     HistogramWeighting weighting = HistogramWeighting::poisson);

struct GaugeSample {
  StrainEstimate strain;
  double peak_energy = 0.0;  // meV
  double energy_err = 0.0;   // meV
};

struct GaugeFactorFit {
  GaugeFactor gauge;
  RegressionResult regression;
};

/// Emission energy versus strain with errors on both axes. The slope is the
/// signed gauge factor.
GaugeFactorFit gauge_factor_fit(std::span<const GaugeSample> samples, Species species = Species::qd,
                                std::string material = {}, const YorkOptions& options = {});

/// sum(dE_i w_i) / sum(w_i); a missing weight counts as 1.
double weighted_mean_shift(std::span<const ShiftMeasurement> shifts);

/// (largest blueshift + |largest redshift|) / reference_strain, in meV per %.
double broadening_rate(std::span<const ShiftMeasurement> shifts, double reference_strain_pct);

/// Fraction of shifts that are strictly positive. Zero shifts stay in the
/// denominator.
double blueshift_fraction(std::span<const ShiftMeasurement> shifts);

/// QD broadening per 1 meV X0 shift carried from a known material to a target
/// one through the ratio of QD to X0 gauge factors.
double scale_broadening_per_x0_shift(double rate_known, double ratio_known, double ratio_target);

/// As above, expressed per % strain using the target X0 gauge factor.
double cross_material_broadening(double rate_known, double ratio_known, double ratio_target,
                                 double x0_gauge_target);

struct BroadeningModel {
  double rate = 0.0;  // meV FWHM per % strain
  double rate_err = 0.0;
  double omega0 = 0.0;  // meV, zero-strain FWHM
  double omega0_err = 0.0;
  double reduced_chi2 = 0.0;

  void validate() const;
};

double predict_ensemble_fwhm(const BroadeningModel& model, double strain_pct);

struct BroadeningPoint {
  double strain = 0.0;  // %
  double fwhm = 0.0;    // meV
  double fwhm_err = 0.0;
};

/// Fits only the intercept omega0 of fwhm = omega0 + rate * strain with the
/// rate held fixed. Weighted by 1/fwhm_err^2 when all errors are positive.
BroadeningModel fit_broadening_intercept(std::span<const BroadeningPoint> points, double rate, double rate_err = 0.0);

}  // namespace qdstrain
