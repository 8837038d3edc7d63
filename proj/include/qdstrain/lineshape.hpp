#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "qdstrain/constants.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/nlls.hpp"

namespace qdstrain {

enum class LineShape { gaussian, lorentzian };

inline std::string_view to_string(LineShape shape) {
  return shape == LineShape::gaussian ? "gaussian" : "lorentzian";
}

inline LineShape line_shape_from_string(std::string_view s) {
  if (s == "gaussian") return LineShape::gaussian;
  if (s == "lorentzian") return LineShape::lorentzian;
  throw InvalidInput("unknown line shape '" + std::string(s) + "'");
}

/// For a Lorentzian, sigma is the half width at half maximum.
inline double fwhm_from_sigma(LineShape shape, double sigma) {
  return shape == LineShape::gaussian ? kFwhmPerSigma * sigma : 2.0 * sigma;
}

inline double sigma_from_fwhm(LineShape shape, double fwhm) {
  return shape == LineShape::gaussian ? fwhm / kFwhmPerSigma : 0.5 * fwhm;
}

struct PeakFit {
  double center = 0.0;     // meV
  double sigma = 1.0;      // meV
  double amplitude = 0.0;  // peak height above baseline, counts
  double baseline = 0.0;   // counts, constant over the fit window
  LineShape shape = LineShape::gaussian;
  /// Covariance of (center, sigma, amplitude).
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  double baseline_error = 0.0;
  /// Sum of squared residuals over the fit window.
  double residual_norm = 0.0;
  bool converged = true;
  /// sigma was held at the grid-spacing floor.
  bool sigma_at_floor = false;

  double fwhm() const { return fwhm_from_sigma(shape, sigma); }
  double center_error() const { return std::sqrt(std::max(covariance(0, 0), 0.0)); }
  double sigma_error() const { return std::sqrt(std::max(covariance(1, 1), 0.0)); }
  double amplitude_error() const { return std::sqrt(std::max(covariance(2, 2), 0.0)); }
  double fwhm_error() const { return fwhm_from_sigma(shape, sigma_error()); }
};

/// Value and partial derivatives of a single line at x.
template <typename Scalar>
struct LineEval {
  Scalar value, d_center, d_sigma, d_amplitude;
};

template <typename Scalar>
LineEval<Scalar> evaluate_line(LineShape shape, Scalar x, Scalar center, Scalar sigma, Scalar amplitude) {
  const Scalar d = x - center;
  if (shape == LineShape::gaussian) {
    const Scalar u = d / sigma;
    const Scalar g = std::exp(Scalar(-0.5) * u * u);
    return {amplitude * g, amplitude * g * u / sigma, amplitude * g * u * u / sigma, g};
  }
  const Scalar s2 = sigma * sigma;
  const Scalar den = d * d + s2;
  const Scalar l = s2 / den;
  const Scalar den2 = den * den;
  return {amplitude * l, amplitude * Scalar(2) * s2 * d / den2, amplitude * Scalar(2) * sigma * d * d / den2, l};
}

/// Sum of K lines plus a constant baseline, sampled at fixed abscissae.
/// Parameters: [c_1, s_1, a_1, ..., c_K, s_K, a_K, baseline].
template <typename Scalar_ = double>
class LineSumModel {
 public:
  using Scalar = Scalar_;

  LineSumModel(LineShape shape, Eigen::Index line_count, VectorX<Scalar> x, VectorX<Scalar> y)
      : shape_(shape), lines_(line_count), x_(std::move(x)), y_(std::move(y)) {}

  Eigen::Index parameter_count() const { return 3 * lines_ + 1; }
  Eigen::Index residual_count() const { return x_.size(); }

  VectorX<Scalar> evaluate(const VectorX<Scalar>& p) const {
    VectorX<Scalar> out = VectorX<Scalar>::Constant(x_.size(), p[3 * lines_]);
    for (Eigen::Index i = 0; i < x_.size(); ++i) {
      for (Eigen::Index k = 0; k < lines_; ++k) {
        out[i] += evaluate_line(shape_, x_[i], p[3 * k], p[3 * k + 1], p[3 * k + 2]).value;
      }
    }
    return out;
  }

  VectorX<Scalar> residuals(const VectorX<Scalar>& p) const { return evaluate(p) - y_; }

  MatrixX<Scalar> jacobian(const VectorX<Scalar>& p) const {
    MatrixX<Scalar> j(x_.size(), parameter_count());
    for (Eigen::Index i = 0; i < x_.size(); ++i) {
      for (Eigen::Index k = 0; k < lines_; ++k) {
        const auto e = evaluate_line(shape_, x_[i], p[3 * k], p[3 * k + 1], p[3 * k + 2]);
        j(i, 3 * k) = e.d_center;
        j(i, 3 * k + 1) = e.d_sigma;
        j(i, 3 * k + 2) = e.d_amplitude;
      }
      j(i, 3 * lines_) = Scalar(1);
    }
    return j;
  }

 private:
  LineShape shape_;
  Eigen::Index lines_;
  VectorX<Scalar> x_;
  VectorX<Scalar> y_;
};

}  // namespace qdstrain
