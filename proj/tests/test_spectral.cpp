#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qdstrain/peaks.hpp"
#include "qdstrain/synth.hpp"

using namespace qdstrain;

namespace {

Eigen::VectorXd gaussian_on(const Eigen::VectorXd& x, double c, double s, double a) {
  return (((x.array() - c) / s).square() * -0.5).exp().matrix() * a;
}

Spectrum single_peak(double center = 2000.0, double sigma = 2.0, double amp = 1000.0, double base = 0.0,
                     double step = 0.125) {
  const Eigen::VectorXd x = uniform_grid(center - 20.0, center + 20.0, step);
  Eigen::VectorXd y = gaussian_on(x, center, sigma, amp).array() + base;
  return Spectrum(x, y);
}

}  // namespace

TEST_CASE("spectrum validation names the offending point") {
  Eigen::VectorXd x(5), y(5);
  x << 1, 2, 3, 3, 5;
  y << 0, 1, 2, 1, 0;
  try {
    Spectrum s(x, y);
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("point 3") != std::string::npos);
  }
  x << 1, 2, 3, 4, 5;
  y << 0, 1, -2, 1, 0;
  CHECK_THROWS_AS(Spectrum(x, y), InvalidInput);
  CHECK_THROWS_AS(Spectrum(x, Eigen::VectorXd::Zero(4)), InvalidInput);

  SpectrumMeta meta;
  meta.resolution_meV = 1.5;
  CHECK_THROWS_AS(Spectrum(x, Eigen::VectorXd::Zero(5), meta), InvalidInput);
  meta.resolution_meV = 0.125;
  CHECK_NOTHROW(Spectrum(x, Eigen::VectorXd::Zero(5), meta));
}

TEST_CASE("wavelength ingestion converts to increasing meV") {
  Eigen::VectorXd nm(3), y(3);
  nm << 600.0, 610.0, 620.0;
  y << 1.0, 2.0, 3.0;
  const auto s = Spectrum::from_wavelength(nm, y);
  CHECK(s.energy()[0] == doctest::Approx(1239841.98 / 620.0));
  CHECK(s.energy()[2] == doctest::Approx(1239841.98 / 600.0));
  CHECK(s.intensity()[0] == 3.0);
}

TEST_CASE("Gaussian FWHM conversion") {
  CHECK(std::abs(fwhm_from_sigma(LineShape::gaussian, 10.0) - 23.548) < 1e-3);
  CHECK(fwhm_from_sigma(LineShape::lorentzian, 10.0) == 20.0);
  PeakFit f;
  f.sigma = 10.0;
  CHECK(f.fwhm() == doctest::Approx(23.5482));
}

TEST_CASE("detect_peaks: single line at 2067 meV") {
  const auto s = single_peak(2067.0, 2.0, 1000.0, 20.0);
  const auto peaks = detect_peaks(s, 50.0, 1.0);
  REQUIRE(peaks.size() == 1);
  CHECK(std::abs(peaks[0] - 2067.0) <= 0.125);
}

TEST_CASE("detect_peaks: lines 292 meV apart are both found") {
  const Eigen::VectorXd x = uniform_grid(1700.0, 2150.0, 0.125);
  Eigen::VectorXd y = gaussian_on(x, 1775.0, 2.0, 800.0) + gaussian_on(x, 2067.0, 2.0, 1000.0);
  const auto peaks = detect_peaks(Spectrum(x, y), 50.0, 5.0);
  REQUIRE(peaks.size() == 2);
  CHECK(std::abs(peaks[0] - 1775.0) <= 0.125);
  CHECK(std::abs(peaks[1] - 2067.0) <= 0.125);
  CHECK(peaks[1] - peaks[0] == doctest::Approx(292.0).epsilon(1e-3));
}

TEST_CASE("detect_peaks: flat spectrum has no peaks") {
  const Eigen::VectorXd x = uniform_grid(1900.0, 2000.0, 0.5);
  CHECK(detect_peaks(Spectrum(x, Eigen::VectorXd::Zero(x.size())), 1.0, 1.0).empty());
  CHECK(detect_peaks(Spectrum(x, Eigen::VectorXd::Constant(x.size(), 7.0)), 1.0, 1.0).empty());
}

TEST_CASE("detect_peaks: separation thinning keeps the stronger, then the lower-energy line") {
  const Eigen::VectorXd x = uniform_grid(1990.0, 2010.0, 0.125);
  Eigen::VectorXd y = gaussian_on(x, 1998.0, 0.5, 500.0) + gaussian_on(x, 2002.0, 0.5, 900.0);
  auto peaks = detect_peaks(Spectrum(x, y), 10.0, 6.0);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0] == doctest::Approx(2002.0));

  y = gaussian_on(x, 1998.0, 0.5, 700.0) + gaussian_on(x, 2002.0, 0.5, 700.0);
  peaks = detect_peaks(Spectrum(x, y), 10.0, 6.0);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0] == doctest::Approx(1998.0));

  peaks = detect_peaks(Spectrum(x, y), 10.0, 3.0);
  CHECK(peaks.size() == 2);
}

TEST_CASE("detect_peaks: prominence threshold and argument checks") {
  const auto s = single_peak(2000.0, 2.0, 100.0, 0.0);
  CHECK(detect_peaks(s, 150.0, 1.0).empty());
  CHECK(detect_peaks(s, 50.0, 1.0).size() == 1);
  CHECK_THROWS_AS(detect_peaks(s, 0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(detect_peaks(s, 1.0, -1.0), InvalidInput);
}

TEST_CASE("fit_peak: noiseless Gaussian is recovered exactly") {
  const auto s = single_peak(2000.0, 2.0, 1000.0);
  PeakFit guess;
  guess.center = 2000.6;
  guess.sigma = 2.7;
  guess.amplitude = 700.0;
  const auto fit = fit_peak(s, EnergyWindow::around(2000.0, 12.0), guess);
  CHECK(fit.converged);
  CHECK(std::abs(fit.center / 2000.0 - 1.0) < 1e-6);
  CHECK(std::abs(fit.sigma / 2.0 - 1.0) < 1e-6);
  CHECK(std::abs(fit.amplitude / 1000.0 - 1.0) < 1e-6);
  CHECK(fit.residual_norm < 1e-12);
  CHECK_FALSE(fit.sigma_at_floor);
}

TEST_CASE("fit_peak: Lorentzian line shape") {
  const Eigen::VectorXd x = uniform_grid(1980.0, 2020.0, 0.125);
  Eigen::VectorXd y = 1000.0 * (1.5 * 1.5) / ((x.array() - 2001.0).square() + 1.5 * 1.5);
  y.array() += 10.0;
  PeakFit guess;
  guess.shape = LineShape::lorentzian;
  guess.center = 2000.5;
  guess.sigma = 2.0;
  guess.amplitude = 800.0;
  const auto fit = fit_peak(Spectrum(x, y), EnergyWindow{1980.0, 2020.0}, guess);
  CHECK(fit.center == doctest::Approx(2001.0).epsilon(1e-9));
  CHECK(fit.sigma == doctest::Approx(1.5).epsilon(1e-7));
  CHECK(fit.fwhm() == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(fit.baseline == doctest::Approx(10.0).epsilon(1e-7));
}

TEST_CASE("fit_peak: 1% noise, Monte-Carlo over 100 seeds") {
  // RMS centre error over seeds must stay below a tenth of the grid step.
  const Eigen::VectorXd grid = uniform_grid(1980.0, 2020.0, 0.125);
  QDRecord rec;
  rec.energy = 2000.0;
  rec.intensity = 1.0;
  SpectrumSynthConfig cfg;
  cfg.line_fwhm = 2.0 * kFwhmPerSigma;
  cfg.peak_counts = 1000.0;
  cfg.background = 50.0;
  cfg.noise.additive_sigma = 10.0;
  double sq = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    cfg.seed = seed;
    const auto syn = generate_spectrum(std::span(&rec, 1), grid, cfg);
    const auto window = EnergyWindow::around(2000.0, 10.0);
    const auto fit = fit_peak(syn.spectrum, window, estimate_peak(syn.spectrum, 2000.0, window));
    sq += (fit.center - 2000.0) * (fit.center - 2000.0);
  }
  const double rms = std::sqrt(sq / 100.0);
  MESSAGE("centre RMS error over 100 seeds: " << rms << " meV");
  CHECK(rms <= 0.0125);
}

TEST_CASE("fit_peaks: two overlapping lines agree with a brute-force centre search") {
  const double sigma = 2.0;
  const double fwhm = kFwhmPerSigma * sigma;
  const double c1 = 2000.0, c2 = c1 + 1.5 * fwhm;
  const Eigen::VectorXd x = uniform_grid(1985.0, 2025.0, 0.125);
  Eigen::VectorXd y = gaussian_on(x, c1, sigma, 1000.0) + gaussian_on(x, c2, sigma, 700.0);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 10.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = std::max(y[i] + 30.0 + noise(rng), 0.0);
  const Spectrum s(x, y);

  std::vector<PeakFit> guess(2);
  guess[0].center = c1 - 0.8;
  guess[0].sigma = 2.5;
  guess[0].amplitude = 900.0;
  guess[1].center = c2 + 0.8;
  guess[1].sigma = 2.5;
  guess[1].amplitude = 900.0;
  const auto fits = fit_peaks(s, EnergyWindow{1985.0, 2025.0}, guess);
  REQUIRE(fits.size() == 2);

  const auto [o1, o2] = testing::grid_search_two_centers(x, y, c1 - 0.5, c1 + 0.5, c2 - 0.5, c2 + 0.5, 0.01, sigma);
  CHECK(std::abs(fits[0].center - o1) <= 0.02);
  CHECK(std::abs(fits[1].center - o2) <= 0.02);
  CHECK(std::abs(fits[0].center - c1) <= 0.05 * fwhm);
  CHECK(std::abs(fits[1].center - c2) <= 0.05 * fwhm);
}

TEST_CASE("fit_peak is translation-equivariant") {
  const double delta = 37.25;
  const auto a = single_peak(2000.0, 2.0, 1000.0, 15.0);
  const Spectrum b(a.energy().array() + delta, a.intensity());
  PeakFit guess;
  guess.center = 2000.4;
  guess.sigma = 2.4;
  guess.amplitude = 900.0;
  PeakFit shifted = guess;
  shifted.center += delta;
  const auto fa = fit_peak(a, EnergyWindow::around(2000.0, 12.0), guess);
  const auto fb = fit_peak(b, EnergyWindow::around(2000.0 + delta, 12.0), shifted);
  CHECK(std::abs((fb.center - fa.center) - delta) < 1e-9);
  CHECK(fb.sigma == doctest::Approx(fa.sigma).epsilon(1e-9));
}

TEST_CASE("fit_peak is scale-equivariant in amplitude") {
  const double c = 3.7;
  const Eigen::VectorXd x = uniform_grid(1980.0, 2020.0, 0.125);
  Eigen::VectorXd y = gaussian_on(x, 2000.3, 1.8, 1000.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 5.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = std::max(y[i] + 40.0 + noise(rng), 0.0);
  PeakFit guess;
  guess.center = 2000.0;
  guess.sigma = 2.0;
  guess.amplitude = 900.0;
  PeakFit scaled = guess;
  scaled.amplitude *= c;
  const auto fa = fit_peak(Spectrum(x, y), EnergyWindow{1980.0, 2020.0}, guess);
  const auto fb = fit_peak(Spectrum(x, y * c), EnergyWindow{1980.0, 2020.0}, scaled);
  CHECK(fb.amplitude == doctest::Approx(c * fa.amplitude).epsilon(1e-8));
  CHECK(fb.center == doctest::Approx(fa.center).epsilon(1e-10));
  CHECK(fb.sigma == doctest::Approx(fa.sigma).epsilon(1e-8));
}

TEST_CASE("fit_peak error paths and flags") {
  const auto s = single_peak();
  PeakFit guess;
  guess.center = 2000.0;
  guess.sigma = 2.0;
  guess.amplitude = 1000.0;
  CHECK_THROWS_AS(fit_peak(s, EnergyWindow{1999.9, 2000.3}, guess), InvalidInput);
  CHECK_THROWS_AS(fit_peak(s, EnergyWindow{2005.0, 2015.0}, guess), InvalidInput);

  SolverConfig one;
  one.max_iterations = 1;
  PeakFit far = guess;
  far.center = 2003.0;
  far.sigma = 5.0;
  const auto capped = fit_peak(s, EnergyWindow::around(2000.0, 15.0), far, one);
  CHECK_FALSE(capped.converged);

  // A one-sample spike collapses the width onto the grid-spacing floor.
  const Eigen::VectorXd x = uniform_grid(1990.0, 2010.0, 0.5);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(x.size(), 10.0);
  y[20] = 500.0;
  PeakFit spike;
  spike.center = x[20];
  spike.sigma = 1.0;
  spike.amplitude = 400.0;
  const auto f = fit_peak(Spectrum(x, y), EnergyWindow{1990.0, 2010.0}, spike);
  CHECK(f.sigma_at_floor);
  CHECK(f.sigma == doctest::Approx(0.5));
}

TEST_CASE("fit covariance is symmetric positive semi-definite") {
  const Eigen::VectorXd x = uniform_grid(1980.0, 2020.0, 0.125);
  Eigen::VectorXd y = gaussian_on(x, 2000.0, 2.0, 1000.0);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 8.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = std::max(y[i] + 30.0 + noise(rng), 0.0);
  PeakFit guess;
  guess.center = 2000.2;
  guess.sigma = 2.2;
  guess.amplitude = 950.0;
  const auto f = fit_peak(Spectrum(x, y), EnergyWindow{1980.0, 2020.0}, guess);
  CHECK((f.covariance - f.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(f.covariance);
  CHECK(es.eigenvalues().minCoeff() >= -1e-15);
  CHECK(f.center_error() > 0.0);
}

TEST_CASE("line-shape Jacobians match finite differences at 100 random points") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> center(1995.0, 2005.0), width(0.5, 5.0), amp(10.0, 5000.0),
      base(-50.0, 50.0);
  const Eigen::VectorXd x = uniform_grid(1985.0, 2015.0, 0.25);
  for (LineShape shape : {LineShape::gaussian, LineShape::lorentzian}) {
    LineSumModel<double> model(shape, 2, x, Eigen::VectorXd::Zero(x.size()));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd p(7);
      p << center(rng), width(rng), amp(rng), center(rng), width(rng), amp(rng), base(rng);
      Eigen::VectorXd steps(7);
      const double w = 1e-3 * std::min(p[1], p[4]);
      steps << w, w, 1e-3 * p[2], w, w, 1e-3 * p[5], 1e-3 * std::max(p[2], p[5]);
      worst = std::max(worst, testing::jacobian_mismatch(model, p, steps));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("median despike removes an isolated spike only") {
  const auto s = single_peak(2000.0, 2.0, 1000.0, 10.0);
  Eigen::VectorXd y = s.intensity();
  y[20] += 5000.0;
  const auto cleaned = median_despike(Spectrum(s.energy(), y), 2, 200.0);
  CHECK(cleaned.intensity()[20] == doctest::Approx(s.intensity()[20]).epsilon(1e-3));
  const Eigen::Index peak = s.size() / 2;
  CHECK(cleaned.intensity()[peak] == s.intensity()[peak]);
}
