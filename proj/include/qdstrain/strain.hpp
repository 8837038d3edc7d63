#pragma once

#include <optional>
#include <string>

namespace qdstrain {

// Sign conventions used throughout: tensile strain is positive, a redshift is
// a negative energy shift, and gauge factors carry their sign (negative when
// tensile strain redshifts the line).

enum class Species { qd, x0 };

std::string to_string(Species s);
Species species_from_string(const std::string& s);

/// dE/d(strain) in meV per % strain with a 1-sigma error.
struct GaugeFactor {
  double value = 0.0;
  double error = 0.0;
  Species species = Species::x0;
  std::string material;

  void validate() const;
};

struct ShiftMeasurement {
  double delta_E = 0.0;      // meV, redshift negative
  double delta_E_err = 0.0;  // meV, 1 sigma
  std::optional<double> weight;
  std::string context;  // location id, field label, temperature pair

  void validate() const;
};

enum class StrainMethod { pl, raman_linear };

struct StrainEstimate {
  double epsilon = 0.0;      // %, tensile positive
  double epsilon_err = 0.0;  // %, 1 sigma
  StrainMethod method = StrainMethod::pl;
  double temperature_K = 296.0;
};

/// E(T) = E0 - alpha T^2 / (T + beta). No defaults: values come from the user.
struct VarshniParams {
  double E0 = 0.0;     // meV
  double alpha = 0.0;  // meV/K
  double beta = 0.0;   // K

  void validate() const;
};

/// |eps| * sqrt((dE_err/dE)^2 + (G_err/G)^2).
/// Throws DomainError when dE == 0 while dE_err > 0 (undefined relative error).
double strain_error(double epsilon, double delta_E, double delta_E_err, double gauge, double gauge_err);

/// Error of a difference of two independent values: sqrt(a^2 + b^2).
double shift_error_subtraction(double err_a, double err_b);

/// epsilon = dE / G with the propagated error. A zero shift maps to zero
/// strain with zero error, the limit of the product form eps * sqrt(...).
StrainEstimate strain_from_shift(const ShiftMeasurement& shift, const GaugeFactor& gauge);

/// Linear Raman converter: epsilon = shift / coefficient, coefficient in
/// cm^-1 per % strain (signed).
StrainEstimate strain_from_raman_shift(double shift_cm1, double shift_err_cm1, double coefficient_cm1_per_pct);

double varshni_energy(const VarshniParams& params, double temperature_K);

/// Shift predicted by the Varshni relation between two temperatures, E(to) - E(from).
double varshni_shift(const VarshniParams& params, double from_K, double to_K);

/// Thermoelastic strain relaxation from the X0 shift measured on cooling,
/// after removing the Varshni expectation. Negative means tensile strain relaxed.
StrainEstimate decompose_temperature_shift(const ShiftMeasurement& measured_shift, double varshni_expected_meV,
                                           const GaugeFactor& gauge_x0);

/// Adds a fixed relaxation offset (%) to a room-temperature strain. The error
/// is carried over unchanged.
StrainEstimate apply_relaxation(const StrainEstimate& epsilon_rt, double relaxation_pct,
                                double target_temperature_K = 4.0);

}  // namespace qdstrain
