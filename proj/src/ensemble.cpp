#include "qdstrain/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qdstrain/constants.hpp"
#include "qdstrain/errors.hpp"

namespace qdstrain {

long EnsembleStats::total() const { return std::accumulate(counts.begin(), counts.end(), 0L); }

EnsembleStats build_histogram(std::span<const double> energies, double bin_size, std::optional<double> origin) {
  if (!(bin_size > 0.0)) throw InvalidInput("histogram: bin_size must be > 0");
  if (energies.empty()) throw InvalidInput("histogram: no energies");
  for (double e : energies) {
    if (!std::isfinite(e)) throw InvalidInput("histogram: non-finite energy");
  }
  const auto [lo_it, hi_it] = std::minmax_element(energies.begin(), energies.end());
  EnsembleStats out;
  out.bin_size = bin_size;
  out.origin = origin.value_or(std::floor(*lo_it / bin_size) * bin_size);
  std::size_t nbins = 0;
  if (*hi_it >= out.origin) nbins = static_cast<std::size_t>(std::floor((*hi_it - out.origin) / bin_size)) + 1;
  out.counts.assign(nbins, 0);
  for (double e : energies) {
    if (e < out.origin) {
      ++out.out_of_range;
      continue;
    }
    auto k = static_cast<std::size_t>(std::floor((e - out.origin) / bin_size));
    // Guard the top edge against rounding in the division.
    k = std::min(k, nbins - 1);
    ++out.counts[k];
  }
  out.edges.resize(nbins + 1);
  for (std::size_t k = 0; k <= nbins; ++k) out.edges[k] = out.origin + static_cast<double>(k) * bin_size;
  return out;
}

EnsembleStats fit_gaussian_histogram(EnsembleStats stats, const SolverConfig& config, HistogramWeighting weighting) {
  const auto nonzero = std::count_if(stats.counts.begin(), stats.counts.end(), [](long c) { return c > 0; });
  if (nonzero < 4) throw InvalidInput("fit_gaussian_histogram: need at least 4 non-empty bins");
  const auto n = static_cast<Eigen::Index>(stats.counts.size());
  Eigen::VectorXd x(n), y(n), w(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    x[k] = stats.bin_center(static_cast<std::size_t>(k));
    y[k] = static_cast<double>(stats.counts[static_cast<std::size_t>(k)]);
    w[k] = weighting == HistogramWeighting::poisson ? 1.0 / std::sqrt(std::max(y[k], 1.0)) : 1.0;
  }
  const double total = y.sum();
  const double mean = x.dot(y) / total;
  const double var = (x.array() - mean).square().matrix().dot(y) / total;

  Eigen::VectorXd p0(3);
  p0 << mean, std::max(std::sqrt(var), 0.5 * stats.bin_size), y.maxCoeff();
  SolverConfig cfg = config;
  if (!cfg.parameter_bounds) {
    ParameterBounds b = ParameterBounds::unbounded(3);
    b.lower[1] = 1e-3 * stats.bin_size;
    b.lower[2] = 0.0;
    cfg.parameter_bounds = b;
  }
  HistogramGaussianModel<double> model(x, y, w);
  const auto res = nlls_solve(model, p0, cfg);

  HistogramGaussian g;
  g.peak_energy = res.parameters[0];
  g.fwhm = kFwhmPerSigma * res.parameters[1];
  g.amplitude = res.parameters[2];
  g.covariance = res.covariance;
  g.peak_energy_err = std::sqrt(std::max(res.covariance(0, 0), 0.0));
  g.fwhm_err = kFwhmPerSigma * std::sqrt(std::max(res.covariance(1, 1), 0.0));
  g.converged = res.converged;
  stats.gauss = g;
  return stats;
}

GaugeFactorFit gauge_factor_fit(std::span<const GaugeSample> samples, Species species, std::string material,
                                const YorkOptions& options) {
  if (samples.size() < 3) throw InvalidInput("gauge_factor_fit: need at least 3 samples");
  std::vector<XYPoint> pts;
  pts.reserve(samples.size());
  for (const auto& s : samples) pts.push_back({s.strain.epsilon, s.strain.epsilon_err, s.peak_energy, s.energy_err});
  GaugeFactorFit out;
  out.regression = york_fit(pts, options);
  out.gauge.value = out.regression.slope;
  out.gauge.error = out.regression.slope_err;
  out.gauge.species = species;
  out.gauge.material = std::move(material);
  return out;
}

double weighted_mean_shift(std::span<const ShiftMeasurement> shifts) {
  if (shifts.empty()) throw InvalidInput("weighted_mean_shift: no shifts");
  double num = 0.0, den = 0.0;
  for (const auto& s : shifts) {
    s.validate();
    const double w = s.weight.value_or(1.0);
    num += s.delta_E * w;
    den += w;
  }
  if (!(den > 0.0)) throw DomainError("weighted_mean_shift: zero total weight");
  return num / den;
}

double broadening_rate(std::span<const ShiftMeasurement> shifts, double reference_strain_pct) {
  if (shifts.empty()) throw InvalidInput("broadening_rate: no shifts");
  if (!(reference_strain_pct > 0.0)) throw InvalidInput("broadening_rate: reference strain must be > 0");
  double blue = 0.0, red = 0.0;
  for (const auto& s : shifts) {
    blue = std::max(blue, s.delta_E);
    red = std::min(red, s.delta_E);
  }
  return (blue + std::abs(red)) / reference_strain_pct;
}

double blueshift_fraction(std::span<const ShiftMeasurement> shifts) {
  if (shifts.empty()) throw InvalidInput("blueshift_fraction: no shifts");
  const auto blue = std::count_if(shifts.begin(), shifts.end(), [](const auto& s) { return s.delta_E > 0.0; });
  return static_cast<double>(blue) / static_cast<double>(shifts.size());
}

double scale_broadening_per_x0_shift(double rate_known, double ratio_known, double ratio_target) {
  if (!(ratio_known > 0.0) || !(ratio_target > 0.0)) throw InvalidInput("cross_material_broadening: ratios must be > 0");
  return rate_known * ratio_target / ratio_known;
}

double cross_material_broadening(double rate_known, double ratio_known, double ratio_target, double x0_gauge_target) {
  if (x0_gauge_target == 0.0) throw InvalidInput("cross_material_broadening: zero X0 gauge factor");
  return scale_broadening_per_x0_shift(rate_known, ratio_known, ratio_target) * std::abs(x0_gauge_target);
}

void BroadeningModel::validate() const {
  if (!(rate >= 0.0)) throw InvalidInput("broadening model: rate must be >= 0");
  if (!(omega0 > 0.0)) throw InvalidInput("broadening model: omega0 must be > 0");
}

double predict_ensemble_fwhm(const BroadeningModel& model, double strain_pct) {
  model.validate();
  if (strain_pct < 0.0) throw InvalidInput("predict_ensemble_fwhm: strain must be >= 0");
  return model.omega0 + model.rate * strain_pct;
}

BroadeningModel fit_broadening_intercept(std::span<const BroadeningPoint> points, double rate, double rate_err) {
  if (points.empty()) throw InvalidInput("fit_broadening_intercept: no points");
  const bool weighted = std::all_of(points.begin(), points.end(), [](const auto& p) { return p.fwhm_err > 0.0; });
  double sw = 0.0, swr = 0.0;
  for (const auto& p : points) {
    const double w = weighted ? 1.0 / (p.fwhm_err * p.fwhm_err) : 1.0;
    sw += w;
    swr += w * (p.fwhm - rate * p.strain);
  }
  BroadeningModel m;
  m.rate = rate;
  m.rate_err = rate_err;
  m.omega0 = swr / sw;
  double chi2 = 0.0;
  for (const auto& p : points) {
    const double res = p.fwhm - rate * p.strain - m.omega0;
    chi2 += weighted ? res * res / (p.fwhm_err * p.fwhm_err) : res * res;
  }
  const double dof = static_cast<double>(points.size()) - 1.0;
  m.reduced_chi2 = dof > 0.0 ? chi2 / dof : 0.0;
  if (weighted) {
    m.omega0_err = std::sqrt(1.0 / sw);
  } else {
    m.omega0_err = dof > 0.0 ? std::sqrt(chi2 / dof / sw) : 0.0;
  }
  return m;
}

}  // namespace qdstrain
