#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/strain.hpp"

using namespace qdstrain;

namespace {

ShiftMeasurement shift(double de, double err = 0.0) {
  ShiftMeasurement s;
  s.delta_E = de;
  s.delta_E_err = err;
  return s;
}

GaugeFactor gauge(double g, double err = 0.0) { return GaugeFactor{g, err, Species::x0, "WS2"}; }

}  // namespace

TEST_CASE("strain_from_shift examples") {
  auto e = strain_from_shift(shift(-2.0), gauge(-40.0));
  CHECK(e.epsilon == doctest::Approx(0.05));

  e = strain_from_shift(shift(0.0, 0.3), gauge(-40.0, 4.0));
  CHECK(e.epsilon == 0.0);
  CHECK(e.epsilon_err == 0.0);

  e = strain_from_shift(shift(-1.0), gauge(-153.8));
  CHECK(e.epsilon == doctest::Approx(0.0065).epsilon(1e-2));

  CHECK_THROWS_AS(strain_from_shift(shift(1.0), gauge(0.0)), InvalidInput);
}

TEST_CASE("strain_from_shift is linear in the shift") {
  const auto g = gauge(-38.2, 3.8);
  const auto base = strain_from_shift(shift(-1.7, 0.2), g);
  for (double a : {-3.0, -0.5, 0.25, 2.0, 10.0}) {
    const auto scaled = strain_from_shift(shift(a * -1.7, std::abs(a) * 0.2), g);
    CHECK(scaled.epsilon == doctest::Approx(a * base.epsilon).epsilon(1e-14));
    CHECK(scaled.epsilon_err == doctest::Approx(std::abs(a) * base.epsilon_err).epsilon(1e-14));
  }
}

TEST_CASE("strain_error examples") {
  CHECK(strain_error(0.5, 20.0, 2.0, 40.0, 4.0) == doctest::Approx(0.5 * std::sqrt(0.02)).epsilon(1e-12));
  CHECK(std::abs(strain_error(0.5, 20.0, 2.0, 40.0, 4.0) - 0.0707) < 1e-4);
  CHECK(strain_error(0.5, 20.0, 0.0, 40.0, 0.0) == 0.0);
  CHECK(strain_error(0.5, 20.0, 0.0, 40.0, 4.0) == doctest::Approx(0.05));
  CHECK_THROWS_AS(strain_error(0.5, 0.0, 1.0, 40.0, 4.0), DomainError);
  CHECK_THROWS_AS(strain_error(0.5, 1.0, 1.0, 0.0, 4.0), DomainError);
}

TEST_CASE("strain_error properties") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int i = 0; i < 200; ++i) {
    const double eps = u(rng), de = u(rng) * 10.0, de_err = u(rng), g = -u(rng) * 100.0, g_err = u(rng) * 5.0;
    const double e = strain_error(eps, de, de_err, g, g_err);
    // swapping which quantity carries which relative error leaves the result unchanged
    const double swapped = strain_error(eps, 1.0, std::abs(g_err / g), 1.0, de_err / de);
    CHECK(e == doctest::Approx(swapped).epsilon(1e-12));
    CHECK(strain_error(3.0 * eps, de, de_err, g, g_err) == doctest::Approx(3.0 * e).epsilon(1e-12));
    CHECK(e >= eps * std::abs(g_err / g) * (1.0 - 1e-15));
    CHECK(e >= eps * std::abs(de_err / de) * (1.0 - 1e-15));
  }
}

TEST_CASE("strain_error agrees with Monte-Carlo propagation") {
  std::mt19937_64 rng(2024);
  struct Case {
    double de, de_err, g, g_err;
  };
  for (const Case c : {Case{-20.0, 1.0, -40.0, 2.0}, Case{-2.0, 0.2, -38.2, 1.9}, Case{15.0, 0.5, -149.0, 14.9},
                       Case{-8.0, 0.8, -275.0, 5.0}}) {
    std::normal_distribution<double> de(c.de, c.de_err), g(c.g, c.g_err);
    std::vector<double> draws(100000);
    for (double& d : draws) d = de(rng) / g(rng);
    const double mc = testing::stddev(draws);
    const double eps = c.de / c.g;
    const double formula = strain_error(eps, c.de, c.de_err, c.g, c.g_err);
    CHECK(std::abs(formula / mc - 1.0) < 0.05);
  }
}

TEST_CASE("shift_error_subtraction") {
  CHECK(shift_error_subtraction(3.0, 4.0) == 5.0);
  CHECK(shift_error_subtraction(0.0, 0.7) == 0.7);
  CHECK_THROWS_AS(shift_error_subtraction(-1.0, 1.0), InvalidInput);

  std::mt19937_64 rng(77);
  const double err_rt = 1.4, err_4k = 0.9;
  std::normal_distribution<double> rt(2010.0, err_rt), cold(2050.0, err_4k);
  std::vector<double> diff(100000);
  for (double& d : diff) d = cold(rng) - rt(rng);
  CHECK(std::abs(shift_error_subtraction(err_rt, err_4k) / testing::stddev(diff) - 1.0) < 0.05);
}

TEST_CASE("varshni_energy") {
  VarshniParams v{2000.0, 0.4, 200.0};
  CHECK(varshni_energy(v, 0.0) == 2000.0);
  CHECK(varshni_energy(v, 296.0) == doctest::Approx(2000.0 - 0.4 * 87616.0 / 496.0));
  CHECK(std::abs(varshni_energy(v, 296.0) - 1929.34) < 0.01);
  for (double t = 1.0; t <= 400.0; t += 1.0) {
    CHECK(varshni_energy(v, t) - varshni_energy(v, 0.0) <= 0.0);
    CHECK(varshni_energy(v, t) <= varshni_energy(v, t - 1.0));
  }
  VarshniParams flat{2000.0, 0.0, 150.0};
  CHECK(varshni_energy(flat, 250.0) == 2000.0);
  CHECK_THROWS_AS(varshni_energy(VarshniParams{2000.0, 0.4, 0.0}, 10.0), InvalidInput);
  CHECK_THROWS_AS(varshni_energy(v, -1.0), InvalidInput);
  CHECK(varshni_shift(v, 296.0, 4.0) == doctest::Approx(varshni_energy(v, 4.0) - varshni_energy(v, 296.0)));
}

TEST_CASE("decompose_temperature_shift") {
  auto d = decompose_temperature_shift(shift(10.64), 0.0, gauge(-38.0));
  CHECK(d.epsilon == doctest::Approx(-0.28));
  CHECK(d.temperature_K == 4.0);

  d = decompose_temperature_shift(shift(65.0), 65.0, gauge(-38.0, 3.8));
  CHECK(d.epsilon == 0.0);
  CHECK_THROWS_AS(decompose_temperature_shift(shift(65.0, 0.5), 65.0, gauge(-38.0)), DomainError);
}

TEST_CASE("relaxation round trip on a noiseless synthetic sample") {
  const VarshniParams v{2010.0, 0.45, 180.0};
  const GaugeFactor g = gauge(-38.2, 3.82);
  const double eps_rt = 0.62, injected = -0.36;
  // X0 energies at each temperature: Varshni plus the strain-induced shift.
  const double e_rt = varshni_energy(v, 296.0) + g.value * eps_rt;
  const double e_4k = varshni_energy(v, 4.0) + g.value * (eps_rt + injected);
  const auto relax = decompose_temperature_shift(shift(e_4k - e_rt, 1.0), varshni_shift(v, 296.0, 4.0), g);
  CHECK(relax.epsilon == doctest::Approx(injected).epsilon(1e-12));
  CHECK(relax.epsilon_err > 0.0);

  StrainEstimate rt;
  rt.epsilon = eps_rt;
  rt.epsilon_err = 0.05;
  const auto cold = apply_relaxation(rt, relax.epsilon);
  CHECK(cold.epsilon == doctest::Approx(eps_rt + injected).epsilon(1e-12));
  CHECK(cold.epsilon_err == 0.05);
  CHECK(cold.temperature_K == 4.0);
}

TEST_CASE("apply_relaxation examples") {
  StrainEstimate e;
  e.epsilon = 0.90;
  CHECK(apply_relaxation(e, -0.28).epsilon == doctest::Approx(0.62));
  e.epsilon = 0.28;
  CHECK(std::abs(apply_relaxation(e, -0.28).epsilon) < 1e-15);
  e.epsilon = 0.16;
  CHECK(apply_relaxation(e, -0.28).epsilon == doctest::Approx(-0.12));
}

TEST_CASE("raman linear converter and species parsing") {
  const auto r = strain_from_raman_shift(-2.4, 0.3, -4.8);
  CHECK(r.epsilon == doctest::Approx(0.5));
  CHECK(r.epsilon_err == doctest::Approx(0.0625));
  CHECK(r.method == StrainMethod::raman_linear);
  CHECK_THROWS_AS(strain_from_raman_shift(1.0, 0.1, 0.0), InvalidInput);
  CHECK(species_from_string("QD") == Species::qd);
  CHECK(to_string(Species::x0) == "X0");
  CHECK_THROWS_AS(species_from_string("trion"), InvalidInput);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(gauge(-38.0, -1.0).validate(), InvalidInput);
  ShiftMeasurement s = shift(1.0);
  s.weight = 0.0;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  CHECK_THROWS_AS(strain_from_shift(shift(1.0, -0.1), gauge(-38.0)), InvalidInput);
}
