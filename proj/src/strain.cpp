#include "qdstrain/strain.hpp"

#include <cmath>

#include "qdstrain/errors.hpp"

namespace qdstrain {

std::string to_string(Species s) { return s == Species::qd ? "QD" : "X0"; }

Species species_from_string(const std::string& s) {
  if (s == "QD" || s == "qd") return Species::qd;
  if (s == "X0" || s == "x0") return Species::x0;
  throw InvalidInput("unknown species '" + s + "'");
}

void GaugeFactor::validate() const {
  if (value == 0.0 || !std::isfinite(value)) throw InvalidInput("gauge factor must be finite and non-zero");
  if (!(error >= 0.0)) throw InvalidInput("gauge factor error must be >= 0");
}

void ShiftMeasurement::validate() const {
  if (!(delta_E_err >= 0.0)) throw InvalidInput("shift error must be >= 0");
  if (weight && !(*weight > 0.0)) throw InvalidInput("shift weight must be > 0");
}

void VarshniParams::validate() const {
  if (!(beta > 0.0)) throw InvalidInput("varshni: beta must be > 0");
}

double strain_error(double epsilon, double delta_E, double delta_E_err, double gauge, double gauge_err) {
  if (gauge == 0.0) throw DomainError("strain_error: zero gauge factor");
  if (delta_E_err < 0.0 || gauge_err < 0.0) throw InvalidInput("strain_error: negative error");
  double shift_term = 0.0;
  if (delta_E == 0.0) {
    if (delta_E_err > 0.0) throw DomainError("strain_error: relative error of a zero shift is undefined");
  } else {
    shift_term = delta_E_err / delta_E;
  }
  const double gauge_term = gauge_err / gauge;
  return std::abs(epsilon) * std::sqrt(shift_term * shift_term + gauge_term * gauge_term);
}

double shift_error_subtraction(double err_a, double err_b) {
  if (err_a < 0.0 || err_b < 0.0) throw InvalidInput("shift_error_subtraction: negative error");
  return std::hypot(err_a, err_b);
}

StrainEstimate strain_from_shift(const ShiftMeasurement& shift, const GaugeFactor& gauge) {
  gauge.validate();
  shift.validate();
  StrainEstimate out;
  out.method = StrainMethod::pl;
  out.epsilon = shift.delta_E / gauge.value;
  out.epsilon_err =
      shift.delta_E == 0.0 ? 0.0 : strain_error(out.epsilon, shift.delta_E, shift.delta_E_err, gauge.value, gauge.error);
  return out;
}

StrainEstimate strain_from_raman_shift(double shift_cm1, double shift_err_cm1, double coefficient_cm1_per_pct) {
  if (coefficient_cm1_per_pct == 0.0) throw InvalidInput("raman: zero coefficient");
  if (shift_err_cm1 < 0.0) throw InvalidInput("raman: negative error");
  StrainEstimate out;
  out.method = StrainMethod::raman_linear;
  out.epsilon = shift_cm1 / coefficient_cm1_per_pct;
  out.epsilon_err = shift_err_cm1 / std::abs(coefficient_cm1_per_pct);
  return out;
}

double varshni_energy(const VarshniParams& params, double temperature_K) {
  params.validate();
  if (temperature_K < 0.0) throw InvalidInput("varshni: negative temperature");
  return params.E0 - params.alpha * temperature_K * temperature_K / (temperature_K + params.beta);
}

double varshni_shift(const VarshniParams& params, double from_K, double to_K) {
  return varshni_energy(params, to_K) - varshni_energy(params, from_K);
}

StrainEstimate decompose_temperature_shift(const ShiftMeasurement& measured_shift, double varshni_expected_meV,
                                           const GaugeFactor& gauge_x0) {
  gauge_x0.validate();
  measured_shift.validate();
  const double excess = measured_shift.delta_E - varshni_expected_meV;
  StrainEstimate out;
  out.method = StrainMethod::pl;
  out.temperature_K = 4.0;
  out.epsilon = excess / gauge_x0.value;
  out.epsilon_err = strain_error(out.epsilon, excess, measured_shift.delta_E_err, gauge_x0.value, gauge_x0.error);
  return out;
}

StrainEstimate apply_relaxation(const StrainEstimate& epsilon_rt, double relaxation_pct, double target_temperature_K) {
  StrainEstimate out = epsilon_rt;
  out.epsilon = epsilon_rt.epsilon + relaxation_pct;
  out.temperature_K = target_temperature_K;
  return out;
}

}  // namespace qdstrain
