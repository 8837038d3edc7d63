#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "qdstrain/errors.hpp"
#include "qdstrain/regression.hpp"

using namespace qdstrain;

namespace {

// Minimises the York objective sum W_i(b) (y_i - a - b x_i)^2 directly by
// golden-section search over b, with a profiled out in closed form.
double york_objective(const std::vector<XYPoint>& pts, double b, double* a_out = nullptr) {
  double sw = 0.0, swx = 0.0, swy = 0.0;
  std::vector<double> w(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double wx = 1.0 / (pts[i].x_err * pts[i].x_err), wy = 1.0 / (pts[i].y_err * pts[i].y_err);
    w[i] = wx * wy / (wx + b * b * wy);
    sw += w[i];
    swx += w[i] * pts[i].x;
    swy += w[i] * pts[i].y;
  }
  const double a = (swy - b * swx) / sw;
  if (a_out) *a_out = a;
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double r = pts[i].y - a - b * pts[i].x;
    s += w[i] * r * r;
  }
  return s;
}

double golden_slope(const std::vector<XYPoint>& pts, double lo, double hi) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  for (int i = 0; i < 200; ++i) {
    if (york_objective(pts, c) < york_objective(pts, d)) {
      hi = d;
    } else {
      lo = c;
    }
    c = hi - g * (hi - lo);
    d = lo + g * (hi - lo);
  }
  return 0.5 * (lo + hi);
}

std::vector<XYPoint> pearson_york() {
  const double x[] = {0.0, 0.9, 1.8, 2.6, 3.3, 4.4, 5.2, 6.1, 6.5, 7.4};
  const double y[] = {5.9, 5.4, 4.4, 4.6, 3.5, 3.7, 2.8, 2.8, 2.4, 1.5};
  const double wx[] = {1000, 1000, 500, 800, 200, 80, 60, 20, 1.8, 1};
  const double wy[] = {1, 1.8, 4, 8, 20, 20, 70, 70, 100, 500};
  std::vector<XYPoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({x[i], 1.0 / std::sqrt(wx[i]), y[i], 1.0 / std::sqrt(wy[i])});
  return pts;
}

}  // namespace

TEST_CASE("york_fit: exact line with arbitrary positive errors") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> err(0.01, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<XYPoint> pts;
    for (int i = 0; i < 7; ++i) {
      const double x = -2.0 + 1.3 * i;
      pts.push_back({x, err(rng), 2.0 * x + 1.0, err(rng)});
    }
    const auto r = york_fit(pts);
    CHECK(r.converged);
    CHECK(std::abs(r.slope - 2.0) < 1e-9);
    CHECK(std::abs(r.intercept - 1.0) < 1e-9);
  }
}

TEST_CASE("york_fit: Pearson data with York weights") {
  const auto r = york_fit(pearson_york());
  CHECK(r.slope == doctest::Approx(-0.4805334).epsilon(1e-6));
  CHECK(r.intercept == doctest::Approx(5.4799102).epsilon(1e-6));
  CHECK(r.slope_err == doctest::Approx(0.057985).epsilon(1e-4));
  CHECK(r.intercept_err == doctest::Approx(0.294970).epsilon(1e-4));
}

TEST_CASE("york_fit agrees with direct minimisation of the York objective") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> err(0.05, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<XYPoint> pts;
    for (int i = 0; i < 8; ++i) {
      const double sx = err(rng), sy = err(rng) * 10.0;
      const double x = 0.1 * i;
      pts.push_back({x + sx * z(rng), sx, -149.0 * x + 2050.0 + sy * z(rng), sy});
    }
    const auto r = york_fit(pts);
    const double ref = golden_slope(pts, r.slope - 500.0, r.slope + 500.0);
    double a_ref = 0.0;
    york_objective(pts, ref, &a_ref);
    CHECK(r.slope == doctest::Approx(ref).epsilon(1e-6));
    CHECK(r.intercept == doctest::Approx(a_ref).epsilon(1e-6));
  }
}

TEST_CASE("york_fit reduces to weighted OLS as x errors vanish") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<XYPoint> pts;
  for (int i = 0; i < 9; ++i) {
    const double sy = 0.5 + 0.1 * i;
    pts.push_back({1.0 * i, 0.0, 3.0 - 0.7 * i + sy * z(rng), sy});
  }
  const auto y = york_fit(pts);
  const auto w = weighted_ols(pts);
  CHECK(std::abs(y.slope - w.slope) < 1e-8);
  CHECK(std::abs(y.intercept - w.intercept) < 1e-8);
  CHECK(std::abs(y.slope_err - w.slope_err) < 1e-8);
  CHECK(std::abs(y.intercept_err - w.intercept_err) < 1e-8);
}

TEST_CASE("york_fit slope scales inversely under x rescaling") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<XYPoint> pts;
  for (int i = 0; i < 6; ++i) {
    const double x = -0.1 + 0.17 * i;
    pts.push_back({x + 0.02 * z(rng), 0.02 + 0.01 * i, 2050.0 - 149.0 * x + 15.0 * z(rng), 15.0});
  }
  const auto base = york_fit(pts);
  for (double c : {0.01, 3.0, 250.0}) {
    auto scaled = pts;
    for (auto& p : scaled) {
      p.x *= c;
      p.x_err *= c;
    }
    const auto r = york_fit(scaled);
    CHECK(r.slope == doctest::Approx(base.slope / c).epsilon(1e-9));
    CHECK(r.intercept == doctest::Approx(base.intercept).epsilon(1e-9));
    CHECK(r.slope_err == doctest::Approx(base.slope_err / c).epsilon(1e-7));
  }
}

TEST_CASE("york_fit 1-sigma slope interval covers truth at about the nominal rate") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z(0.0, 1.0);
  int covered = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::vector<XYPoint> pts;
    for (int i = 0; i < 12; ++i) {
      const double x = 0.5 * i, sx = 0.15, sy = 0.4;
      pts.push_back({x + sx * z(rng), sx, 1.5 * x - 2.0 + sy * z(rng), sy});
    }
    const auto r = york_fit(pts);
    if (std::abs(r.slope - 1.5) <= r.slope_err) ++covered;
  }
  const double rate = static_cast<double>(covered) / trials;
  MESSAGE("coverage " << rate);
  CHECK(rate > 0.64);
  CHECK(rate < 0.72);
}

TEST_CASE("york_fit input checks and zero-error floor") {
  std::vector<XYPoint> two{{0, 1, 0, 1}, {1, 1, 1, 1}};
  CHECK_THROWS_AS(york_fit(two), InvalidInput);
  std::vector<XYPoint> flat{{1, 0.1, 0, 1}, {1, 0.1, 1, 1}, {1, 0.1, 2, 1}};
  CHECK_THROWS_AS(york_fit(flat), InvalidInput);
  std::vector<XYPoint> neg{{0, -1, 0, 1}, {1, 1, 1, 1}, {2, 1, 2, 1}};
  CHECK_THROWS_AS(york_fit(neg), InvalidInput);
  std::vector<XYPoint> zero{{0, 0, 1, 0}, {1, 0, 3, 0}, {2, 0, 5, 0}, {3, 0, 7, 0}};
  const auto r = york_fit(zero);
  CHECK(std::isfinite(r.slope_err));
  CHECK(r.slope == doctest::Approx(2.0));
}

TEST_CASE("ols_slope and spearman") {
  std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8};
  CHECK(ols_slope(x, y) == doctest::Approx(2.0));
  std::vector<double> c{5, 5, 5, 5};
  CHECK(ols_slope(c, y) == 0.0);
  CHECK(*spearman_rank_correlation(x, y) == doctest::Approx(1.0));
  std::vector<double> yd{8, 1, 0, -3};
  CHECK(*spearman_rank_correlation(x, yd) == doctest::Approx(-1.0));
  CHECK_FALSE(spearman_rank_correlation(x, c).has_value());
  // Ties take average ranks: x ranks (1, 2.5, 2.5, 4) against y ranks (1, 2, 3, 4).
  std::vector<double> xt{1, 2, 2, 4};
  CHECK(*spearman_rank_correlation(xt, x) == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)));
}
