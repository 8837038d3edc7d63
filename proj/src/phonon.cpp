#include "qdstrain/phonon.hpp"

#include <algorithm>
#include <set>

#include "qdstrain/errors.hpp"
#include "qdstrain/regression.hpp"

namespace qdstrain {

double odonnell_energy(const PhononFit& fit, double temperature_K) {
  if (temperature_K < 0.0) throw InvalidInput("odonnell: negative temperature");
  return odonnell_energy(fit.E0, fit.S, fit.hw_avg, temperature_K);
}

double delta_E_at(const PhononFit& fit, double temperature_K) {
  if (temperature_K < 0.0) throw InvalidInput("odonnell: negative temperature");
  return odonnell_shift(fit.S, fit.hw_avg, temperature_K);
}

PhononFit fit_odonnell(std::span<const TemperaturePoint> series, const SolverConfig& config, std::string emitter) {
  std::set<double> temps;
  for (const auto& p : series) {
    if (p.T < 0.0 || !std::isfinite(p.T)) throw InvalidInput("fit_odonnell: invalid temperature");
    if (!std::isfinite(p.E)) throw InvalidInput("fit_odonnell: non-finite energy");
    temps.insert(p.T);
  }
  if (temps.size() < 4) throw InvalidInput("fit_odonnell: need at least 4 distinct temperatures");
  if (*temps.rbegin() - *temps.begin() < 20.0) throw InvalidInput("fit_odonnell: temperature span below 20 K");

  const auto n = static_cast<Eigen::Index>(series.size());
  const bool weighted = std::all_of(series.begin(), series.end(), [](const auto& p) { return p.E_err > 0.0; });
  Eigen::VectorXd t(n), e(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = series[static_cast<std::size_t>(i)];
    t[i] = p.T;
    e[i] = p.E;
    w[i] = weighted ? 1.0 / p.E_err : 1.0;
  }

  // Cold start: E0 at the highest energy, <hw> = 13 meV, S inverted from the
  // shift at the hottest point.
  const double e0_guess = e.maxCoeff();
  const double hw_guess = 13.0;
  Eigen::Index hottest = 0;
  t.maxCoeff(&hottest);
  const double unit_shift = odonnell_shift(1.0, hw_guess, t[hottest]);
  const double s_guess = unit_shift < 0.0 ? std::max((e[hottest] - e0_guess) / unit_shift, 0.0) : 0.0;

  OdonnellModel<double> model(t, e, w);
  Eigen::VectorXd p0(3);
  p0 << e0_guess, s_guess, hw_guess;

  SolverConfig cfg = config;
  if (!cfg.parameter_bounds) {
    ParameterBounds b = ParameterBounds::unbounded(3);
    b.lower[1] = 0.0;
    b.lower[2] = 1e-3;
    cfg.parameter_bounds = b;
  }
  const auto res = nlls_solve(model, p0, cfg);

  PhononFit fit;
  fit.E0 = res.parameters[0];
  fit.S = res.parameters[1];
  fit.hw_avg = res.parameters[2];
  fit.covariance = res.covariance;
  fit.emitter = std::move(emitter);
  fit.converged = res.converged;
  fit.condition_number = res.condition_number;
  fit.degenerate = !(res.condition_number <= kDegeneracyCondition);
  fit.cost = res.cost;
  return fit;
}

ConfinementTrend confinement_trend(std::span<const PhononFit> fits) {
  if (fits.size() < 3) throw InvalidInput("confinement_trend: need at least 3 fits");
  std::vector<double> e0, s, shift40;
  for (const auto& f : fits) {
    e0.push_back(f.E0);
    s.push_back(f.S);
    shift40.push_back(delta_E_at(f, 40.0));
  }
  ConfinementTrend out;
  out.s_slope = ols_slope(e0, s);
  out.shift40_slope = ols_slope(e0, shift40);
  const auto rho = spearman_rank_correlation(e0, s);
  out.correlation_defined = rho.has_value();
  out.rank_correlation = rho.value_or(0.0);
  return out;
}

}  // namespace qdstrain
