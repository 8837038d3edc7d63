#pragma once

#include <optional>
#include <span>
#include <vector>

namespace qdstrain {

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_err = 0.0;
  double intercept_err = 0.0;
  /// Weighted sum of squared residuals over (n - 2).
  double reduced_chi2 = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct XYPoint {
  double x = 0.0;
  double x_err = 0.0;
  double y = 0.0;
  double y_err = 0.0;
};

struct YorkOptions {
  int max_iterations = 100;
  double slope_tolerance = 1e-10;
  /// Zero errors are replaced by this fraction of the data range on that axis.
  double error_floor_fraction = 1e-6;
};

/// Straight-line fit with uncorrelated errors on both axes (York et al. 2004
/// iteration, started from the ordinary least-squares slope). Requires at least
/// three points with distinct x.
RegressionResult york_fit(std::span<const XYPoint> points, const YorkOptions& options = {});

/// Closed-form weighted least squares with weights 1/y_err^2; x errors ignored.
RegressionResult weighted_ols(std::span<const XYPoint> points);

/// Unweighted least-squares slope. Returns 0 when x has no spread.
double ols_slope(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation with average ranks for ties; empty when either
/// variable is constant.
std::optional<double> spearman_rank_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace qdstrain
