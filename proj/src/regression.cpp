#include "qdstrain/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qdstrain/errors.hpp"

namespace qdstrain {
namespace {

double range_of(std::span<const XYPoint> pts, double XYPoint::*field) {
  const auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(),
                                            [&](const XYPoint& a, const XYPoint& b) { return a.*field < b.*field; });
  return (*hi).*field - (*lo).*field;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw InvalidInput("ols_slope: size mismatch or empty input");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

std::optional<double> spearman_rank_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("spearman: need two equal-length series");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
    sxy += (rx[i] - mx) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

RegressionResult weighted_ols(std::span<const XYPoint> points) {
  if (points.size() < 3) throw InvalidInput("weighted_ols: need at least 3 points");
  double s = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    if (!(p.y_err > 0.0)) throw InvalidInput("weighted_ols: y errors must be > 0");
    const double w = 1.0 / (p.y_err * p.y_err);
    s += w;
    sx += w * p.x;
    sy += w * p.y;
    sxx += w * p.x * p.x;
    sxy += w * p.x * p.y;
  }
  const double delta = s * sxx - sx * sx;
  if (!(delta > 0.0)) throw InvalidInput("weighted_ols: x values have no spread");
  RegressionResult r;
  r.slope = (s * sxy - sx * sy) / delta;
  r.intercept = (sxx * sy - sx * sxy) / delta;
  r.slope_err = std::sqrt(s / delta);
  r.intercept_err = std::sqrt(sxx / delta);
  double chi2 = 0.0;
  for (const auto& p : points) {
    const double res = (p.y - r.slope * p.x - r.intercept) / p.y_err;
    chi2 += res * res;
  }
  r.reduced_chi2 = chi2 / static_cast<double>(points.size() - 2);
  r.iterations = 0;
  return r;
}

RegressionResult york_fit(std::span<const XYPoint> points, const YorkOptions& options) {
  const std::size_t n = points.size();
  if (n < 3) throw InvalidInput("york_fit: need at least 3 points");
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InvalidInput("york_fit: non-finite coordinate");
    if (p.x_err < 0.0 || p.y_err < 0.0) throw InvalidInput("york_fit: negative error");
  }
  const double x_range = range_of(points, &XYPoint::x);
  double x_scale = 0.0;
  for (const auto& p : points) x_scale = std::max(x_scale, std::abs(p.x));
  if (!(x_range > 1e-12 * std::max(x_scale, 1e-300))) throw InvalidInput("york_fit: x values are degenerate");
  const double y_range = range_of(points, &XYPoint::y);
  const double x_floor = options.error_floor_fraction * x_range;
  const double y_floor = options.error_floor_fraction * (y_range > 0.0 ? y_range : 1.0);

  std::vector<double> x(n), y(n), wx(n), wy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = points[i].x;
    y[i] = points[i].y;
    const double sx = points[i].x_err > 0.0 ? points[i].x_err : x_floor;
    const double sy = points[i].y_err > 0.0 ? points[i].y_err : y_floor;
    wx[i] = 1.0 / (sx * sx);
    wy[i] = 1.0 / (sy * sy);
  }

  std::vector<double> w(n), beta(n);
  double xbar = 0.0, ybar = 0.0;
  auto update = [&](double b) {
    double sw = 0.0, swx = 0.0, swy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = wx[i] * wy[i] / (wx[i] + b * b * wy[i]);
      sw += w[i];
      swx += w[i] * x[i];
      swy += w[i] * y[i];
    }
    xbar = swx / sw;
    ybar = swy / sw;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = x[i] - xbar;
      const double v = y[i] - ybar;
      beta[i] = w[i] * (u / wy[i] + b * v / wx[i]);
    }
  };

  RegressionResult r;
  double b = ols_slope(x, y);
  r.converged = false;
  for (int it = 1; it <= options.max_iterations; ++it) {
    update(b);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += w[i] * beta[i] * (y[i] - ybar);
      den += w[i] * beta[i] * (x[i] - xbar);
    }
    const double b_new = num / den;
    r.iterations = it;
    if (!std::isfinite(b_new)) throw NumericalError("york_fit: slope iteration diverged");
    const double change = std::abs(b_new - b);
    b = b_new;
    if (change < options.slope_tolerance) {
      r.converged = true;
      break;
    }
  }

  update(b);
  const double a = ybar - b * xbar;
  double sw = 0.0, swx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    swx += w[i] * (xbar + beta[i]);
  }
  const double xadj_bar = swx / sw;
  double swu2 = 0.0, chi2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = xbar + beta[i] - xadj_bar;
    swu2 += w[i] * u * u;
    const double res = y[i] - b * x[i] - a;
    chi2 += w[i] * res * res;
  }
  r.slope = b;
  r.intercept = a;
  r.slope_err = std::sqrt(1.0 / swu2);
  r.intercept_err = std::sqrt(1.0 / sw + xadj_bar * xadj_bar / swu2);
  r.reduced_chi2 = chi2 / static_cast<double>(n - 2);
  return r;
}

}  // namespace qdstrain
