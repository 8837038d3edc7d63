#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qdstrain/errors.hpp"

namespace qdstrain {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Box constraints on the parameter vector. Either side may be +-infinity.
struct ParameterBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static ParameterBounds unbounded(Eigen::Index n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {Eigen::VectorXd::Constant(n, -inf), Eigen::VectorXd::Constant(n, inf)};
  }
};

struct SolverConfig {
  int max_iterations = 200;
  /// Relative change in cost between accepted steps.
  double convergence_tolerance = 1e-12;
  double initial_damping = 1e-3;
  std::optional<ParameterBounds> parameter_bounds;

  void validate() const {
    if (max_iterations < 1) throw InvalidInput("solver: max_iterations must be >= 1");
    if (!(convergence_tolerance > 0.0)) throw InvalidInput("solver: convergence_tolerance must be > 0");
    if (!(initial_damping > 0.0)) throw InvalidInput("solver: initial_damping must be > 0");
  }
};

/// A residual model r(p) with an analytic Jacobian dr/dp.
template <typename M>
concept ResidualModel = requires(const M& m, const VectorX<typename M::Scalar>& p) {
  typename M::Scalar;
  { m.parameter_count() } -> std::convertible_to<Eigen::Index>;
  { m.residual_count() } -> std::convertible_to<Eigen::Index>;
  { m.residuals(p) } -> std::convertible_to<VectorX<typename M::Scalar>>;
  { m.jacobian(p) } -> std::convertible_to<MatrixX<typename M::Scalar>>;
};

template <typename Scalar>
struct NllsResult {
  VectorX<Scalar> parameters;
  /// (J^T J)^+ scaled by cost / (m - n); unscaled when m <= n.
  MatrixX<Scalar> covariance;
  /// Sum of squared residuals at the returned parameters.
  Scalar cost{};
  int iterations = 0;
  bool converged = false;
  /// Cost after the initial evaluation and after every accepted step.
  std::vector<Scalar> accepted_costs;
  /// Condition number of the column-scaled normal matrix at the optimum.
  Scalar condition_number{};
  /// Per-parameter flag: the returned value sits on a bound.
  std::vector<bool> at_bound;
};

namespace detail {

template <typename Scalar>
void require_finite(const VectorX<Scalar>& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) throw NumericalError(std::string("nlls: NaN in ") + what);
  }
}

template <typename Scalar>
VectorX<Scalar> clamp_to(const VectorX<Scalar>& p, const std::optional<ParameterBounds>& bounds) {
  if (!bounds) return p;
  VectorX<Scalar> out = p;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    out[i] = std::clamp(out[i], static_cast<Scalar>(bounds->lower[i]), static_cast<Scalar>(bounds->upper[i]));
  }
  return out;
}

/// Pseudo-inverse and scaled condition number of a symmetric PSD matrix.
template <typename Scalar>
std::pair<MatrixX<Scalar>, Scalar> psd_inverse(const MatrixX<Scalar>& a) {
  const Eigen::Index n = a.rows();
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(a);
  const VectorX<Scalar>& w = eig.eigenvalues();
  const Scalar wmax = w.size() ? w.maxCoeff() : Scalar(0);
  const Scalar cutoff = wmax * Scalar(n) * std::numeric_limits<Scalar>::epsilon();
  VectorX<Scalar> winv(n);
  for (Eigen::Index i = 0; i < n; ++i) winv[i] = w[i] > cutoff ? Scalar(1) / w[i] : Scalar(0);
  MatrixX<Scalar> inv = eig.eigenvectors() * winv.asDiagonal() * eig.eigenvectors().transpose();

  // Condition number of D^-1/2 A D^-1/2 so that parameter units do not matter.
  Scalar cond = std::numeric_limits<Scalar>::infinity();
  const VectorX<Scalar> d = a.diagonal();
  if ((d.array() > Scalar(0)).all()) {
    const VectorX<Scalar> s = d.array().rsqrt();
    const MatrixX<Scalar> scaled = s.asDiagonal() * a * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(scaled, Eigen::EigenvaluesOnly);
    const Scalar lo = es.eigenvalues().minCoeff();
    if (lo > Scalar(0)) cond = es.eigenvalues().maxCoeff() / lo;
  }
  return {inv, cond};
}

}  // namespace detail

/// Damped Gauss-Newton (Levenberg-Marquardt) minimisation of ||r(p)||^2.
///
/// Damping is Marquardt-scaled: (J^T J + lambda diag(J^T J)) dp = -J^T r, with
/// lambda multiplied by 10 on a rejected step and by 0.3 on an accepted one.
/// Trial points are projected onto the configured bounds. The cost sequence
/// over accepted steps is non-increasing. Singular normal equations are
/// handled by raising the damping; a NaN from the model throws NumericalError.
template <ResidualModel Model>
NllsResult<typename Model::Scalar> nlls_solve(const Model& model,
                                              const VectorX<typename Model::Scalar>& initial,
                                              const SolverConfig& config) {
  using Scalar = typename Model::Scalar;
  config.validate();
  const Eigen::Index n = model.parameter_count();
  const Eigen::Index m = model.residual_count();
  if (initial.size() != n) throw InvalidInput("nlls: initial parameter vector has wrong size");
  if (config.parameter_bounds &&
      (config.parameter_bounds->lower.size() != n || config.parameter_bounds->upper.size() != n)) {
    throw InvalidInput("nlls: bounds have wrong size");
  }

  NllsResult<Scalar> result;
  VectorX<Scalar> p = detail::clamp_to(initial, config.parameter_bounds);
  VectorX<Scalar> r = model.residuals(p);
  if (r.size() != m) throw InvalidInput("nlls: residual vector has wrong size");
  detail::require_finite<Scalar>(r, "residuals");
  Scalar cost = r.squaredNorm();
  result.accepted_costs.push_back(cost);

  Scalar lambda = static_cast<Scalar>(config.initial_damping);
  const Scalar tol = static_cast<Scalar>(config.convergence_tolerance);
  const Scalar lambda_max = Scalar(1e16);
  int small_changes = 0;
  int iter = 0;
  bool converged = false;

  while (iter < config.max_iterations && !converged) {
    ++iter;
    const MatrixX<Scalar> jac = model.jacobian(p);
    if (jac.rows() != m || jac.cols() != n) throw InvalidInput("nlls: Jacobian has wrong shape");
    for (Eigen::Index k = 0; k < jac.size(); ++k) {
      if (std::isnan(jac.data()[k])) throw NumericalError("nlls: NaN in Jacobian");
    }
    const MatrixX<Scalar> a = jac.transpose() * jac;
    const VectorX<Scalar> g = jac.transpose() * r;
    if (cost == Scalar(0) || g.isZero(Scalar(0))) {
      converged = true;
      break;
    }
    const Scalar dmax = std::max(a.diagonal().maxCoeff(), std::numeric_limits<Scalar>::min());
    const VectorX<Scalar> diag = a.diagonal().cwiseMax(dmax * Scalar(1e-12));

    bool accepted = false;
    while (lambda <= lambda_max) {
      MatrixX<Scalar> damped = a;
      damped.diagonal() += lambda * diag;
      Eigen::LDLT<MatrixX<Scalar>> ldlt(damped);
      if (ldlt.info() != Eigen::Success) {
        lambda *= Scalar(10);
        continue;
      }
      const VectorX<Scalar> step = ldlt.solve(-g);
      const VectorX<Scalar> trial = detail::clamp_to<Scalar>(p + step, config.parameter_bounds);
      const VectorX<Scalar> r_trial = model.residuals(trial);
      detail::require_finite<Scalar>(r_trial, "residuals");
      const Scalar cost_trial = r_trial.squaredNorm();
      if (std::isfinite(cost_trial) && cost_trial < cost) {
        const Scalar rel = (cost - cost_trial) / std::max(cost, std::numeric_limits<Scalar>::min());
        const Scalar moved = (trial - p).norm();
        p = trial;
        r = r_trial;
        cost = cost_trial;
        result.accepted_costs.push_back(cost);
        lambda = std::max(lambda * Scalar(0.3), Scalar(1e-15));
        accepted = true;
        // Two consecutive small decreases guard against a heavily damped step
        // being mistaken for convergence.
        small_changes = rel < tol ? small_changes + 1 : 0;
        if (small_changes >= 2 || moved <= tol * (p.norm() + tol)) converged = true;
        break;
      }
      lambda *= Scalar(10);
    }
    // No damping level reduces the cost: stationary to working precision.
    if (!accepted) converged = true;
  }

  const MatrixX<Scalar> jac = model.jacobian(p);
  const MatrixX<Scalar> a = jac.transpose() * jac;
  auto [inv, cond] = detail::psd_inverse<Scalar>(a);
  const Scalar scale = m > n ? cost / Scalar(m - n) : Scalar(1);

  result.parameters = p;
  result.covariance = inv * scale;
  result.cost = cost;
  result.iterations = iter;
  result.converged = converged;
  result.condition_number = cond;
  result.at_bound.assign(static_cast<std::size_t>(n), false);
  if (config.parameter_bounds) {
    for (Eigen::Index i = 0; i < n; ++i) {
      result.at_bound[static_cast<std::size_t>(i)] =
          p[i] <= static_cast<Scalar>(config.parameter_bounds->lower[i]) ||
          p[i] >= static_cast<Scalar>(config.parameter_bounds->upper[i]);
    }
  }
  return result;
}

}  // namespace qdstrain
