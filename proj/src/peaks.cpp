#include "qdstrain/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qdstrain/errors.hpp"

namespace qdstrain {
namespace {

struct Candidate {
  Eigen::Index index;
  double energy;
  double height;
};

double prominence(const Eigen::VectorXd& y, Eigen::Index peak) {
  const double h = y[peak];
  double left_min = h;
  for (Eigen::Index j = peak - 1; j >= 0 && y[j] <= h; --j) left_min = std::min(left_min, y[j]);
  double right_min = h;
  for (Eigen::Index j = peak + 1; j < y.size() && y[j] <= h; ++j) right_min = std::min(right_min, y[j]);
  return h - std::max(left_min, right_min);
}

}  // namespace

std::vector<double> detect_peaks(const Spectrum& spectrum, double min_prominence, double min_separation) {
  if (!(min_prominence > 0.0)) throw InvalidInput("detect_peaks: min_prominence must be > 0");
  if (!(min_separation > 0.0)) throw InvalidInput("detect_peaks: min_separation must be > 0");
  const auto& x = spectrum.energy();
  const auto& y = spectrum.intensity();
  const Eigen::Index n = y.size();

  std::vector<Candidate> found;
  Eigen::Index i = 1;
  while (i < n - 1) {
    if (y[i - 1] < y[i]) {
      Eigen::Index ahead = i + 1;
      while (ahead < n - 1 && y[ahead] == y[i]) ++ahead;
      if (y[ahead] < y[i]) {
        const Eigen::Index mid = (i + ahead - 1) / 2;
        if (prominence(y, mid) >= min_prominence) found.push_back({mid, x[mid], y[mid]});
        i = ahead;
        continue;
      }
    }
    ++i;
  }

  std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
    if (a.height != b.height) return a.height > b.height;
    return a.energy < b.energy;
  });
  std::vector<double> kept;
  for (const auto& c : found) {
    const bool clash = std::any_of(kept.begin(), kept.end(),
                                   [&](double e) { return std::abs(e - c.energy) < min_separation; });
    if (!clash) kept.push_back(c.energy);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

PeakFit estimate_peak(const Spectrum& spectrum, double center, EnergyWindow window, LineShape shape) {
  const auto& x = spectrum.energy();
  const auto& y = spectrum.intensity();
  Eigen::Index lo = 0;
  while (lo < x.size() && x[lo] < window.lo) ++lo;
  Eigen::Index hi = x.size() - 1;
  while (hi >= 0 && x[hi] > window.hi) --hi;
  if (hi - lo + 1 < 1) throw InvalidInput("estimate_peak: window contains no grid points");

  const auto peak_it = std::lower_bound(x.data() + lo, x.data() + hi + 1, center);
  Eigen::Index ip = std::clamp<Eigen::Index>(peak_it - x.data(), lo, hi);
  const double base = y.segment(lo, hi - lo + 1).minCoeff();
  const double height = std::max(y[ip] - base, std::numeric_limits<double>::min());
  const double half = base + 0.5 * height;

  Eigen::Index l = ip;
  while (l > lo && y[l] > half) --l;
  Eigen::Index r = ip;
  while (r < hi && y[r] > half) ++r;
  double fwhm = x[r] - x[l];
  if (!(fwhm > 0.0)) fwhm = 2.0 * spectrum.min_spacing();

  PeakFit guess;
  guess.center = x[ip];
  guess.shape = shape;
  guess.sigma = sigma_from_fwhm(shape, fwhm);
  guess.amplitude = height;
  guess.baseline = base;
  return guess;
}

std::vector<PeakFit> fit_peaks(const Spectrum& spectrum, EnergyWindow window, std::span<const PeakFit> initial,
                               const SolverConfig& config) {
  if (initial.empty()) throw InvalidInput("fit_peaks: need at least one initial line");
  const auto& x = spectrum.energy();
  const auto& y = spectrum.intensity();
  Eigen::Index lo = 0;
  while (lo < x.size() && x[lo] < window.lo) ++lo;
  Eigen::Index hi = x.size() - 1;
  while (hi >= 0 && x[hi] > window.hi) --hi;
  const Eigen::Index count = hi - lo + 1;
  if (count < 5) throw InvalidInput("fit_peak: degenerate window, fewer than 5 grid points");
  for (const auto& p : initial) {
    if (!window.contains(p.center)) throw InvalidInput("fit_peak: initial center outside window");
    if (p.shape != initial.front().shape) throw InvalidInput("fit_peaks: mixed line shapes");
  }

  const LineShape shape = initial.front().shape;
  const auto k = static_cast<Eigen::Index>(initial.size());
  const Eigen::VectorXd xs = x.segment(lo, count);
  const Eigen::VectorXd ys = y.segment(lo, count);
  LineSumModel<double> model(shape, k, xs, ys);

  double floor_sigma = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i < count; ++i) floor_sigma = std::min(floor_sigma, xs[i] - xs[i - 1]);
  const double width = xs[count - 1] - xs[0];

  Eigen::VectorXd p0(3 * k + 1);
  ParameterBounds bounds = ParameterBounds::unbounded(3 * k + 1);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& g = initial[static_cast<std::size_t>(j)];
    p0.segment<3>(3 * j) << g.center, g.sigma, g.amplitude;
    bounds.lower.segment<3>(3 * j) << window.lo, floor_sigma, 0.0;
    bounds.upper.segment<3>(3 * j) << window.hi, std::max(width, floor_sigma), std::numeric_limits<double>::infinity();
  }
  p0[3 * k] = ys.minCoeff();
  if (config.parameter_bounds && config.parameter_bounds->lower.size() == 3 * k + 1) {
    bounds.lower = bounds.lower.cwiseMax(config.parameter_bounds->lower);
    bounds.upper = bounds.upper.cwiseMin(config.parameter_bounds->upper);
  }
  SolverConfig cfg = config;
  cfg.parameter_bounds = bounds;

  const auto res = nlls_solve(model, p0, cfg);

  std::vector<PeakFit> fits;
  fits.reserve(initial.size());
  for (Eigen::Index j = 0; j < k; ++j) {
    PeakFit f;
    f.shape = shape;
    f.center = res.parameters[3 * j];
    f.sigma = res.parameters[3 * j + 1];
    f.amplitude = res.parameters[3 * j + 2];
    f.baseline = res.parameters[3 * k];
    f.covariance = res.covariance.block<3, 3>(3 * j, 3 * j);
    f.baseline_error = std::sqrt(std::max(res.covariance(3 * k, 3 * k), 0.0));
    f.residual_norm = res.cost;
    f.converged = res.converged;
    f.sigma_at_floor = f.sigma <= floor_sigma;
    fits.push_back(f);
  }
  return fits;
}

PeakFit fit_peak(const Spectrum& spectrum, EnergyWindow window, const PeakFit& initial, const SolverConfig& config) {
  return fit_peaks(spectrum, window, std::span<const PeakFit>(&initial, 1), config).front();
}

}  // namespace qdstrain
