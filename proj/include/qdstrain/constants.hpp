#pragma once

namespace qdstrain {

/// Boltzmann constant in meV/K.
inline constexpr double kBoltzmannMeVPerK = 0.0861733;

/// hc in meV*nm, so that E[meV] = kHcMeVNm / lambda[nm].
inline constexpr double kHcMeVNm = 1239841.98;

/// FWHM = kFwhmPerSigma * sigma for a Gaussian, i.e. 2*sqrt(2 ln 2).
inline constexpr double kFwhmPerSigma = 2.3548200450309493;

/// Default thermoelastic strain offset (%) applied to room-temperature strains
/// to estimate 4 K strains. Derived from two WS2 samples; override per dataset.
inline constexpr double kDefaultRelaxationPct = -0.28;

inline double wavelength_nm_to_meV(double lambda_nm) { return kHcMeVNm / lambda_nm; }

}  // namespace qdstrain
