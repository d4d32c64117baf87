#include <doctest.h>

#include <cmath>
#include <vector>

#include "bmsopt/cell_model.hpp"
#include "support.hpp"

using namespace bmsopt;
using testing::cell;

TEST_SUITE("cell-model") {

TEST_CASE("arrhenius") {
  const double R = 8.314462618;
  CHECK(arrhenius(3e-14, 5e4, 298.0, 298.0, R) == doctest::Approx(3e-14).epsilon(1e-15));
  CHECK(arrhenius(3e-14, 0.0, 310.0, 298.0, R) == doctest::Approx(3e-14).epsilon(1e-15));
  const long double expect =
      3e-14L * std::exp((5e4L / static_cast<long double>(R)) * (1.0L / 298.0L - 1.0L / 308.0L));
  CHECK(arrhenius(3e-14, 5e4, 308.0, 298.0, R) == doctest::Approx(static_cast<double>(expect)).epsilon(1e-13));
  CHECK_THROWS(arrhenius(1.0, 1.0, -1.0, 298.0, R));
}

TEST_CASE("exchange current density") {
  const auto& p = cell();
  const double cmax = p.neg().c_s_max;
  const double peak = exchange_current_density(p, Electrode::kNeg, 0.5 * cmax, 298.0);
  for (double f : {0.01, 0.1, 0.3, 0.49, 0.51, 0.7, 0.9, 0.99}) {
    CHECK(exchange_current_density(p, Electrode::kNeg, f * cmax, 298.0) <= peak);
  }
  CHECK(exchange_current_density(p, Electrode::kNeg, 1e-9 * cmax, 298.0) < 1e-3 * peak);
  // Formula oracle at T = T_ref (no Arrhenius factor).
  const long double c = 0.5L * cmax;
  const long double oracle = static_cast<long double>(p.neg().k_ref) * p.constants.F *
                             std::sqrt(static_cast<long double>(p.electrolyte.c_e_avg) * c * (cmax - c));
  CHECK(peak == doctest::Approx(static_cast<double>(oracle)).epsilon(1e-12));
}

TEST_CASE("overpotential") {
  const auto& p = cell();
  const double cs = 0.5 * p.neg().c_s_max;
  CHECK(overpotential(p, Electrode::kNeg, cs, 298.0, 0.0) == 0.0);
  CHECK(overpotential(p, Electrode::kNeg, cs, 298.0, -4.0) < 0.0);
  const long double i0 = exchange_current_density(p, Electrode::kNeg, cs, 298.0);
  const auto& n = p.neg();
  const long double oracle = (static_cast<long double>(p.constants.R_g) * 298.0L / (0.5L * p.constants.F)) *
                             std::asinh(-4.0L / (2.0L * p.A * n.a_s * n.L * i0));
  CHECK(overpotential(p, Electrode::kNeg, cs, 298.0, -4.0) == doctest::Approx(static_cast<double>(oracle)).epsilon(1e-12));
}

TEST_CASE("SEI and electrolyte resistances") {
  auto p = cell();
  CHECK(sei_resistance(p, 1e-8) == doctest::Approx(2.0 * sei_resistance(p, 5e-9)).epsilon(1e-14));
  const double oracle = 5e-9 / (p.neg().a_s * p.A * p.neg().L * p.kappa_sei);
  CHECK(sei_resistance(p, 5e-9) == doctest::Approx(oracle).epsilon(1e-14));
  const double r = electrolyte_resistance(p);
  for (auto& k : p.electrolyte.kappa_eff) k *= 2.0;
  CHECK(electrolyte_resistance(p) == doctest::Approx(0.5 * r).epsilon(1e-14));
}

TEST_CASE("cell voltage") {
  const auto& p = cell();
  const double cn = p.neg().theta_at_soc(0.5) * p.neg().c_s_max;
  const double cp = p.pos().theta_at_soc(0.5) * p.pos().c_s_max;
  const double ocv = p.pos().ocv(cp / p.pos().c_s_max) - p.neg().ocv(cn / p.neg().c_s_max);
  CHECK(cell_voltage(p, cn, cp, 298.0, 5e-9, 0.0) == doctest::Approx(ocv).epsilon(1e-14));
  const double v = cell_voltage(p, cn, cp, 298.0, 5e-9, -4.0);
  CHECK(v > ocv);
  const double oracle = ocv + overpotential(p, Electrode::kPos, cp, 298.0, -4.0) -
                        overpotential(p, Electrode::kNeg, cn, 298.0, -4.0) +
                        4.0 * (p.R_l + electrolyte_resistance(p) + sei_resistance(p, 5e-9));
  CHECK(v == doctest::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("bulk SOC") {
  const auto& p = cell();
  const auto w = bulk_weights(p.n_conc());
  auto soc_of = [&](double theta) {
    std::vector<double> c(p.n_conc(), theta * p.neg().c_s_max);
    return soc_bulk<double>(p, Electrode::kNeg, w, c);
  };
  CHECK(soc_of(p.neg().theta_100) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(soc_of(p.neg().theta_0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(soc_of(0.5 * (p.neg().theta_0 + p.neg().theta_100)) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("solid diffusion") {
  const auto& p = cell();
  const int M = p.n_conc();
  std::vector<double> c(M, 0.4 * p.neg().c_s_max), out(M);
  solid_diffusion_rhs<double>(p, Electrode::kNeg, c, 298.0, 0.0, 0.0, out);
  for (double v : out) CHECK(std::abs(v) < 1e-12);

  solid_diffusion_rhs<double>(p, Electrode::kNeg, c, 298.0, -4.0, 0.0, out);
  CHECK(out.back() > 0.0);

  // A linear radial profile c = a + b r has Laplacian 2b/r; the finite
  // difference stencil reproduces it exactly at interior nodes, and the
  // zero-flux surface row gives -2 b D / dr.
  const double dr = p.neg().R_s / (p.N_r - 1);
  const double D = p.neg().D_s_ref;  // T = T_ref
  const double a = 1.0e4, b = 2.0e8;
  for (int i = 0; i < M; ++i) c[i] = a + b * (i + 1) * dr;
  solid_diffusion_rhs<double>(p, Electrode::kNeg, c, p.constants.T_ref, 0.0, 0.0, out);
  for (int i = 0; i + 1 < M; ++i) {
    CHECK(out[i] == doctest::Approx(2.0 * b * D / ((i + 1) * dr)).epsilon(1e-9));
  }
  CHECK(out[M - 1] == doctest::Approx(-2.0 * b * D / dr).epsilon(1e-9));
}

TEST_CASE("side reaction and aging") {
  const auto& p = cell();
  const double cn = 0.6 * p.neg().c_s_max;
  CHECK(side_reaction_current(p, cn, 298.0, -4.0, 5e-9, 0.0) == 0.0);
  CHECK(side_reaction_current(p, cn, 298.0, -4.0, 5e-9, 100.0) < 0.0);
  CHECK(side_reaction_current(p, cn, 310.0, -8.0, 7e-9, 3000.0) < 0.0);

  const auto zero = aging_rhs(p, 0.0);
  CHECK(zero.dL_dt == 0.0);
  CHECK(zero.dQ_dt == 0.0);
  // i_s = -1: dL/dt = M / (2 F rho) by the lumped geometry cancelling out.
  const auto r = aging_rhs(p, -1.0);
  CHECK(r.dL_dt == doctest::Approx(p.aging.M_sei / (2.0 * p.constants.F * p.aging.rho_sei)).epsilon(1e-12));
  for (double is : {-1e-3, -0.2, -5.0}) {
    const auto x = aging_rhs(p, is);
    CHECK(x.dL_dt == doctest::Approx(sei_growth_factor(p) * x.dQ_dt).epsilon(1e-14));
    CHECK(x.dL_dt > 0.0);
  }
}

TEST_CASE("thermal") {
  const auto& p = cell();
  const auto eq = thermal_rhs(p, 298.0, 298.0, 298.0, 0.0, 3.7, 3.7);
  CHECK(eq.dT_c == 0.0);
  CHECK(eq.dT_s == 0.0);
  const auto ch = thermal_rhs(p, 298.0, 298.0, 298.0, -4.0, 3.9, 3.7);
  CHECK(ch.dT_c == doctest::Approx(-4.0 * (3.7 - 3.9) / p.thermal.C_c).epsilon(1e-14));
  CHECK(ch.dT_c > 0.0);
  CHECK(ch.dT_s == 0.0);
}

TEST_CASE("solvent diffusion") {
  const auto& p = cell();
  const int N = p.N_sei;
  std::vector<double> c(N, 2000.0), out(N);
  solvent_diffusion_rhs<double>(p, c, 5e-9, 0.0, 0.0, 298.0, out);
  for (double v : out) CHECK(std::abs(v) < 1e-9);
  CHECK(out.back() == 0.0);

  // Linear profile, no growth: interior rows vanish and the surface row is
  // the one-sided flux 2 D b / (L^2 dxi).
  const double L = 5e-9, b = 100.0, dxi = 1.0 / (N - 1);
  for (int i = 0; i < N; ++i) c[i] = 1000.0 + b * i * dxi;
  solvent_diffusion_rhs<double>(p, c, L, 0.0, 0.0, p.constants.T_ref, out);
  const double D = p.aging.D_solv_ref;
  CHECK(out[0] == doctest::Approx(2.0 * D * b / (L * L * dxi)).epsilon(1e-10));
  for (int i = 1; i + 1 < N; ++i) CHECK(std::abs(out[i]) < 1e-6 * std::abs(out[0]));
  solvent_diffusion_rhs<double>(p, c, L, 1e-12, -0.5, 310.0, out);
  CHECK(out.back() == 0.0);
}

TEST_CASE("characteristic time scales") {
  auto p = cell();
  const auto t = characteristic_timescales(p);
  CHECK(t.thermal < t.electrochemical);
  CHECK(t.electrochemical * 1e3 < t.aging);
  CHECK(t.thermal >= 10.0);
  CHECK(t.thermal <= 100.0);
  CHECK(t.electrochemical >= 1e2);
  CHECK(t.electrochemical < 1e4);
  CHECK(t.aging >= 1e7);
  CHECK(t.aging < 1e10);
  p.R_cell *= 2.0;
  CHECK(characteristic_timescales(p).thermal == doctest::Approx(4.0 * t.thermal).epsilon(1e-14));
}

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(cell().validate());
  auto p = cell();
  p.electrode[0].theta_0 = 2.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = cell();
  p.thermal.C_c = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

}  // TEST_SUITE
