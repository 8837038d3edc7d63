#pragma once

#include <span>
#include <vector>

#include "qdstrain/lineshape.hpp"
#include "qdstrain/nlls.hpp"
#include "qdstrain/spectrum.hpp"

namespace qdstrain {

struct EnergyWindow {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double e) const { return e >= lo && e <= hi; }
  static EnergyWindow around(double center, double half_width) { return {center - half_width, center + half_width}; }
};

/// Candidate peak centres (meV), ascending.
///
/// A candidate is a local maximum (plateaus resolve to their midpoint) whose
/// topographic prominence is at least `min_prominence`. Candidates closer than
/// `min_separation` are thinned, keeping the more intense one and, on an exact
/// tie, the lower-energy one.
std::vector<double> detect_peaks(const Spectrum& spectrum, double min_prominence, double min_separation);

/// Initial guess for a line at `center`: height above the window minimum and
/// width from the half-maximum crossings.
PeakFit estimate_peak(const Spectrum& spectrum, double center, EnergyWindow window,
                      LineShape shape = LineShape::gaussian);

/// Least-squares fit of one line plus constant baseline inside `window`.
PeakFit fit_peak(const Spectrum& spectrum, EnergyWindow window, const PeakFit& initial,
                 const SolverConfig& config = {});

/// Joint fit of several lines sharing one constant baseline.
std::vector<PeakFit> fit_peaks(const Spectrum& spectrum, EnergyWindow window, std::span<const PeakFit> initial,
                               const SolverConfig& config = {});

}  // namespace qdstrain
