#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "qdstrain/constants.hpp"
#include "qdstrain/nlls.hpp"

namespace qdstrain {

/// Below this temperature the O'Donnell-Chen shift is taken at its T -> 0 limit.
inline constexpr double kZeroTemperatureCutoffK = 1e-3;

/// Bandgap shift of the O'Donnell-Chen model relative to T = 0:
///   dE(T) = -S <hw> [coth(<hw> / 2 k_B T) - 1] = -2 S <hw> / expm1(<hw> / k_B T).
/// The expm1 form stays finite for <hw> >> k_B T.
template <typename Scalar>
Scalar odonnell_shift(Scalar huang_rhys, Scalar hw_avg, Scalar temperature_K) {
  if (temperature_K < Scalar(kZeroTemperatureCutoffK)) return Scalar(0);
  const Scalar u = hw_avg / (Scalar(kBoltzmannMeVPerK) * temperature_K);
  return Scalar(-2) * huang_rhys * hw_avg / std::expm1(u);
}

/// Partial derivatives of odonnell_shift with respect to (S, <hw>).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> odonnell_shift_gradient(Scalar huang_rhys, Scalar hw_avg, Scalar temperature_K) {
  if (temperature_K < Scalar(kZeroTemperatureCutoffK)) return Eigen::Matrix<Scalar, 2, 1>::Zero();
  const Scalar u = hw_avg / (Scalar(kBoltzmannMeVPerK) * temperature_K);
  const Scalar em = std::expm1(u);
  const Scalar f = Scalar(2) / em;
  // d/du [2 / expm1(u)] = -2 e^u / expm1(u)^2 = -2 / (expm1(u) * -expm1(-u))
  const Scalar df_du = Scalar(-2) / (em * -std::expm1(-u));
  Eigen::Matrix<Scalar, 2, 1> g;
  g << -hw_avg * f, -huang_rhys * f - huang_rhys * u * df_du;
  return g;
}

template <typename Scalar>
Scalar odonnell_energy(Scalar e0, Scalar huang_rhys, Scalar hw_avg, Scalar temperature_K) {
  return e0 + odonnell_shift(huang_rhys, hw_avg, temperature_K);
}

struct PhononFit {
  double E0 = 0.0;      // meV
  double S = 0.0;       // Huang-Rhys factor
  double hw_avg = 0.0;  // meV
  /// Covariance of (E0, S, hw_avg).
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  std::string emitter;
  bool converged = true;
  /// Scaled normal matrix condition number above kDegeneracyCondition.
  bool degenerate = false;
  double condition_number = 0.0;
  double cost = 0.0;

  double E0_error() const { return std::sqrt(std::max(covariance(0, 0), 0.0)); }
  double S_error() const { return std::sqrt(std::max(covariance(1, 1), 0.0)); }
  double hw_avg_error() const { return std::sqrt(std::max(covariance(2, 2), 0.0)); }
};

inline constexpr double kDegeneracyCondition = 1e8;

struct TemperaturePoint {
  double T = 0.0;      // K
  double E = 0.0;      // meV
  double E_err = 0.0;  // meV; 0 means unknown
};

double odonnell_energy(const PhononFit& fit, double temperature_K);

/// E(T) - E0; never positive for S >= 0.
double delta_E_at(const PhononFit& fit, double temperature_K);

/// Weighted residuals (E_model - E) / E_err over a temperature series.
/// Parameters: [E0, S, hw_avg].
template <typename Scalar_ = double>
class OdonnellModel {
 public:
  using Scalar = Scalar_;

  OdonnellModel(VectorX<Scalar> temperatures, VectorX<Scalar> energies, VectorX<Scalar> inv_sigma)
      : t_(std::move(temperatures)), e_(std::move(energies)), w_(std::move(inv_sigma)) {}

  Eigen::Index parameter_count() const { return 3; }
  Eigen::Index residual_count() const { return t_.size(); }

  VectorX<Scalar> residuals(const VectorX<Scalar>& p) const {
    VectorX<Scalar> r(t_.size());
    for (Eigen::Index i = 0; i < t_.size(); ++i) r[i] = w_[i] * (odonnell_energy(p[0], p[1], p[2], t_[i]) - e_[i]);
    return r;
  }

  MatrixX<Scalar> jacobian(const VectorX<Scalar>& p) const {
    MatrixX<Scalar> j(t_.size(), 3);
    for (Eigen::Index i = 0; i < t_.size(); ++i) {
      const auto g = odonnell_shift_gradient(p[1], p[2], t_[i]);
      j(i, 0) = w_[i];
      j(i, 1) = w_[i] * g[0];
      j(i, 2) = w_[i] * g[1];
    }
    return j;
  }

 private:
  VectorX<Scalar> t_;
  VectorX<Scalar> e_;
  VectorX<Scalar> w_;
};

/// Fits (E0, S, <hw>) to a temperature series. Weights are 1/E_err^2 when every
/// point carries an error, otherwise uniform. Requires at least 4 distinct
/// temperatures spanning at least 20 K.
PhononFit fit_odonnell(std::span<const TemperaturePoint> series, const SolverConfig& config = {},
                       std::string emitter = {});

struct ConfinementTrend {
  double s_slope = 0.0;           // dS/dE0, 1/meV
  double rank_correlation = 0.0;  // Spearman, S vs E0
  bool correlation_defined = true;
  double shift40_slope = 0.0;  // d[dE(40 K)]/dE0
};

/// Huang-Rhys factor and 40 K redshift trends across a set of QD fits.
ConfinementTrend confinement_trend(std::span<const PhononFit> fits);

}  // namespace qdstrain
