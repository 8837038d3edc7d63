#include "doctest.h"

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/phonon.hpp"
#include "qdstrain/synth.hpp"

using namespace qdstrain;

namespace {

PhononFit params(double e0, double s, double hw) {
  PhononFit f;
  f.E0 = e0;
  f.S = s;
  f.hw_avg = hw;
  return f;
}

std::vector<double> temps(double lo, double hi, double step) {
  std::vector<double> t;
  for (double v = lo; v <= hi + 1e-9; v += step) t.push_back(v);
  return t;
}

QDRecord record(double e0, double s, double hw) {
  QDRecord r;
  r.energy = e0;
  r.huang_rhys = s;
  r.hw_avg = hw;
  return r;
}

// Naive coth form, evaluated in long double where it is still finite.
long double coth_shift(long double s, long double hw, long double t) {
  const long double x = hw / (2.0L * static_cast<long double>(kBoltzmannMeVPerK) * t);
  return -s * hw * (std::cosh(x) / std::sinh(x) - 1.0L);
}

}  // namespace

TEST_CASE("odonnell_energy examples") {
  const auto x0 = params(2000.0, 2.29, 13.35);
  CHECK(odonnell_energy(x0, 0.0) == 2000.0);
  CHECK(std::abs(delta_E_at(x0, 40.0) - (-1.30)) <= 0.01);
  const auto decoupled = params(2000.0, 0.0, 13.35);
  for (double t : {0.0, 4.0, 40.0, 300.0}) CHECK(odonnell_energy(decoupled, t) == 2000.0);
  CHECK(delta_E_at(x0, 0.0) == 0.0);
  CHECK_THROWS_AS(odonnell_energy(x0, -1.0), InvalidInput);
}

TEST_CASE("expm1 form agrees with the coth definition and never overflows") {
  for (double t : {0.5, 2.0, 10.0, 40.0, 94.0, 300.0}) {
    const double ref = static_cast<double>(coth_shift(2.29L, 13.35L, t));
    CHECK(odonnell_shift(2.29, 13.35, t) == doctest::Approx(ref).epsilon(1e-12));
  }
  for (double t : {1e-3, 1e-2, 0.05}) {
    const double v = odonnell_shift(2.29, 13.35, t);
    CHECK(std::isfinite(v));
    CHECK(v <= 0.0);
  }
  CHECK(odonnell_shift(2.29, 13.35, 1e-4) == 0.0);
}

TEST_CASE("high-temperature slope approaches -2 S k_B") {
  const double s = 2.29, hw = 13.35, t = 500.0, h = 1e-3;
  const double slope = (odonnell_shift(s, hw, t + h) - odonnell_shift(s, hw, t - h)) / (2.0 * h);
  const double asymptote = -2.0 * s * kBoltzmannMeVPerK;
  CHECK(std::abs(asymptote - (-0.3947)) < 5e-5);
  CHECK(std::abs(slope / asymptote - 1.0) < 0.01);
}

TEST_CASE("E(T) is monotone decreasing and C1 on a dense grid") {
  double prev = odonnell_shift(2.29, 13.35, 0.0);
  double prev_slope = 0.0;
  for (double t = 0.25; t <= 400.0; t += 0.25) {
    const double v = odonnell_shift(2.29, 13.35, t);
    CHECK(v <= prev);
    const double slope = (v - prev) / 0.25;
    CHECK(std::abs(slope - prev_slope) < 0.01);
    prev = v;
    prev_slope = slope;
  }
}

TEST_CASE("QD with larger S redshifts more at 40 K") {
  const auto x0 = params(2000.0, 2.29, 13.35);
  const auto qd = params(1900.0, 4.0, 13.35);
  CHECK(std::abs(delta_E_at(qd, 40.0)) > std::abs(delta_E_at(x0, 40.0)));
  CHECK(std::abs(delta_E_at(qd, 40.0)) > 1.30);
  CHECK(delta_E_at(x0, 94.0) < delta_E_at(x0, 40.0));
}

TEST_CASE("O'Donnell-Chen Jacobian matches finite differences, including near T -> 0") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> e0(1600.0, 2100.0), s(0.2, 6.0), hw(3.0, 40.0);
  Eigen::VectorXd t(12);
  t << 0.0, 1e-3, 0.02, 0.3, 1.0, 2.0, 5.0, 10.0, 38.0, 60.0, 94.0, 300.0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    OdonnellModel<double> model(t, Eigen::VectorXd::Zero(t.size()), Eigen::VectorXd::Ones(t.size()));
    Eigen::VectorXd p(3);
    p << e0(rng), s(rng), hw(rng);
    Eigen::VectorXd steps(3);
    steps << 1e-3, 1e-3 * p[1], 1e-3 * p[2];
    worst = std::max(worst, testing::jacobian_mismatch(model, p, steps));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("fit_odonnell: noiseless round trip") {
  const auto series = generate_temperature_series(record(1750.0, 2.29, 13.35), temps(5.0, 90.0, 5.0), 0.0, 1);
  const auto fit = fit_odonnell(series, {}, "X0");
  CHECK(fit.converged);
  CHECK(std::abs(fit.E0 / 1750.0 - 1.0) < 1e-6);
  CHECK(std::abs(fit.S / 2.29 - 1.0) < 1e-6);
  CHECK(std::abs(fit.hw_avg / 13.35 - 1.0) < 1e-6);
  CHECK(fit.emitter == "X0");
  CHECK_FALSE(fit.degenerate);
}

TEST_CASE("fit_odonnell: noise 0.2 meV, median error over 100 seeds") {
  std::vector<double> ds, dhw;
  const auto t = temps(5.0, 90.0, 5.0);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto series = generate_temperature_series(record(1750.0, 2.29, 13.35), t, 0.2, seed);
    const auto fit = fit_odonnell(series);
    ds.push_back(std::abs(fit.S - 2.29));
    dhw.push_back(std::abs(fit.hw_avg - 13.35));
    const Eigen::Matrix3d c = fit.covariance;
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * c.cwiseAbs().maxCoeff());
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(c).eigenvalues().minCoeff() >= -1e-12 * c.norm());
  }
  const double ms = testing::median(ds), mhw = testing::median(dhw);
  MESSAGE("median |dS| = " << ms << ", median |d<hw>| = " << mhw << " meV");
  CHECK(ms <= 0.12);
  CHECK(mhw <= 0.6);
}

TEST_CASE("fit_odonnell: QD range up to 38 K still recovers noiseless truth") {
  const auto series = generate_temperature_series(record(1850.0, 3.5, 13.35), temps(4.0, 38.0, 2.0), 0.0, 1);
  const auto fit = fit_odonnell(series);
  CHECK(std::abs(fit.S / 3.5 - 1.0) < 1e-5);
  CHECK(std::abs(fit.hw_avg / 13.35 - 1.0) < 1e-5);
}

TEST_CASE("fit_odonnell: constant series is flagged degenerate") {
  std::vector<TemperaturePoint> flat;
  for (double t : temps(5.0, 90.0, 5.0)) flat.push_back({t, 1750.0, 0.2});
  const auto fit = fit_odonnell(flat);
  CHECK(fit.S == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fit.degenerate);
}

TEST_CASE("fit_odonnell: preconditions") {
  std::vector<TemperaturePoint> few{{5, 1750, 0.1}, {10, 1749.9, 0.1}, {30, 1749, 0.1}};
  CHECK_THROWS_AS(fit_odonnell(few), InvalidInput);
  std::vector<TemperaturePoint> narrow{{5, 1750, 0.1}, {10, 1749.9, 0.1}, {15, 1749.5, 0.1}, {20, 1749, 0.1}};
  CHECK_THROWS_AS(fit_odonnell(narrow), InvalidInput);
  std::vector<TemperaturePoint> dup{{5, 1750, 0.1}, {5, 1750, 0.1}, {30, 1749, 0.1}, {30, 1749, 0.1}};
  CHECK_THROWS_AS(fit_odonnell(dup), InvalidInput);
}

TEST_CASE("fit_odonnell is deterministic") {
  const auto series = generate_temperature_series(record(1750.0, 2.29, 13.35), temps(5.0, 90.0, 5.0), 0.2, 9);
  const auto a = fit_odonnell(series), b = fit_odonnell(series);
  CHECK(a.E0 == b.E0);
  CHECK(a.S == b.S);
  CHECK(a.hw_avg == b.hw_avg);
  CHECK(a.covariance == b.covariance);
}

TEST_CASE("confinement_trend") {
  std::vector<PhononFit> prop;
  for (double e0 : {1800.0, 1850.0, 1900.0, 1950.0}) prop.push_back(params(e0, e0 / 800.0, 13.35));
  auto tr = confinement_trend(prop);
  CHECK(tr.rank_correlation == doctest::Approx(1.0));
  CHECK(tr.s_slope == doctest::Approx(1.0 / 800.0));
  CHECK(tr.shift40_slope < 0.0);

  std::vector<PhononFit> same(4, params(1900.0, 2.5, 13.35));
  tr = confinement_trend(same);
  CHECK(tr.s_slope == 0.0);
  CHECK_FALSE(tr.correlation_defined);

  CHECK_THROWS_AS(confinement_trend(std::span(prop).first(2)), InvalidInput);
}

TEST_CASE("confinement trend recovered from synthetic QDs with S rising in E0") {
  // Smaller dots: higher E0 and larger S.
  PopulationConfig pc;
  pc.n_locations = 12;
  pc.strain = {0.3, 0.2, -0.1, 0.75};
  pc.jitter_sigma = 60.0;
  pc.s_ref = 3.0;
  pc.e_ref = 1950.0;
  pc.s_exponent = 4.0;
  pc.rng_seed = 31;
  const auto pop = generate_population(pc);
  for (double noise : {0.0, 0.02}) {
    std::vector<PhononFit> fits;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const auto series = generate_temperature_series(pop[i], temps(4.0, 38.0, 2.0), noise, 100 + i);
      fits.push_back(fit_odonnell(series));
    }
    const auto tr = confinement_trend(fits);
    CHECK(tr.s_slope > 0.0);
    CHECK(tr.shift40_slope < 0.0);
    // Below 38 K S and <hw> trade off strongly, so even small noise scrambles the ranks.
    if (noise == 0.0) CHECK(tr.rank_correlation >= 0.9);
  }
}
