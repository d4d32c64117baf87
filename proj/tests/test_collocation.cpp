#include <doctest.h>

#include <cmath>
#include <random>

#include "audit.hpp"
#include "bmsopt/collocation.hpp"
#include "bmsopt/ip_solver.hpp"
#include "support.hpp"

using namespace bmsopt;

namespace {

// Textbook Cox-de Boor recursion, written independently of SplineBasis.
double cox_de_boor(const std::vector<double>& t, int i, int k, double x) {
  if (k == 1) {
    if (t[i] <= x && x < t[i + 1]) return 1.0;
    // Right end point belongs to the last non-empty interval.
    if (x == t.back() && t[i] < t[i + 1] && t[i + 1] == t.back()) return 1.0;
    return 0.0;
  }
  double v = 0.0;
  if (t[i + k - 1] > t[i]) v += (x - t[i]) / (t[i + k - 1] - t[i]) * cox_de_boor(t, i, k - 1, x);
  if (t[i + k] > t[i + 1]) v += (t[i + k] - x) / (t[i + k] - t[i + 1]) * cox_de_boor(t, i + 1, k - 1, x);
  return v;
}

double cox_de_boor_deriv(const std::vector<double>& t, int i, int k, double x) {
  double v = 0.0;
  if (t[i + k - 1] > t[i]) v += (k - 1) / (t[i + k - 1] - t[i]) * cox_de_boor(t, i, k - 1, x);
  if (t[i + k] > t[i + 1]) v -= (k - 1) / (t[i + k] - t[i + 1]) * cox_de_boor(t, i + 1, k - 1, x);
  return v;
}

// Roots of the Legendre polynomial by Newton from Chebyshev guesses.
std::vector<double> legendre_roots(int q) {
  std::vector<double> r;
  for (int i = 0; i < q; ++i) {
    double x = -std::cos(M_PI * (i + 0.75) / (q + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int n = 2; n <= q; ++n) {
        const double p2 = ((2 * n - 1) * x * p1 - (n - 1) * p0) / n;
        p0 = p1;
        p1 = p2;
      }
      const double pq = q == 0 ? 1.0 : p1;
      const double dp = q * (x * pq - p0) / (x * x - 1.0);
      const double dx = pq / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.push_back(x);
  }
  return r;
}

ChargingProblem problem(Scheme s, double soc1 = 0.2, double soc2 = 0.4) {
  ChargingProblem p;
  p.scheme = s;
  p.weights = {0.5, 1.0, 2e12, 2e14};
  p.initial = {{soc1, 5e-9, 2.0, 298.15}, {soc2, 5e-9, 2.0, 298.15}};
  return p;
}

}  // namespace

TEST_SUITE("collocation") {

TEST_CASE("basis dimensions and partition of unity") {
  for (auto [d, s] : {std::pair{1, 0}, {2, 1}, {3, 1}, {3, 2}, {4, 2}}) {
    SplineBasis b(20, d, s);
    CHECK(b.n_fp() == 20 * (d - s) + s);
    std::vector<double> ones(b.n_fp(), 3.25);
    SplineTrajectory tr{b, ones};
    for (int i = 0; i <= 100; ++i) CHECK(bspline_eval(tr, i / 100.0) == doctest::Approx(3.25).epsilon(1e-13));
  }
}

TEST_CASE("piecewise constant spline takes the segment coefficient") {
  SplineBasis b(5, 1, 0);
  std::vector<double> w{1, 2, 3, 4, 5};
  SplineTrajectory tr{b, w};
  for (int seg = 0; seg < 5; ++seg) CHECK(bspline_eval(tr, (seg + 0.5) / 5) == w[seg]);
}

TEST_CASE("evaluation matches the Cox-de Boor recursion") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-2, 2);
  for (auto [d, s] : {std::pair{2, 1}, {3, 1}, {3, 2}, {4, 3}}) {
    SplineBasis b(7, d, s);
    std::vector<double> w(b.n_fp());
    for (auto& x : w) x = U(rng);
    SplineTrajectory tr{b, w};
    const auto& t = b.knots();
    for (int i = 0; i <= 200; ++i) {
      const double x = i / 200.0;
      double v = 0.0, dv = 0.0;
      for (int j = 0; j < b.n_fp(); ++j) {
        v += w[j] * cox_de_boor(t, j, d, x);
        dv += w[j] * cox_de_boor_deriv(t, j, d, x);
      }
      CHECK(std::abs(bspline_eval(tr, x) - v) < 1e-12);
      // Derivatives jump at C0 breakpoints; compare away from them.
      const double seg = x * 7;
      if (std::abs(seg - std::round(seg)) > 1e-9 || s >= 2) {
        CHECK(std::abs(bspline_eval(tr, x, 1) - dv) < 1e-10 * std::max(1.0, std::abs(dv)));
      }
    }
  }
}

TEST_CASE("Gauss nodes") {
  const auto mid = collocation_points(4, 1);
  for (int k = 0; k < 4; ++k) CHECK(mid[k] == doctest::Approx((k + 0.5) / 4).epsilon(1e-15));
  const auto two = collocation_points(1, 2);
  CHECK(two[0] == doctest::Approx((1 - 1 / std::sqrt(3.0)) / 2).epsilon(1e-15));
  CHECK(two[1] == doctest::Approx((1 + 1 / std::sqrt(3.0)) / 2).epsilon(1e-15));
  for (int q = 1; q <= 6; ++q) {
    std::vector<double> x, w;
    gauss_legendre(q, x, w);
    const auto r = legendre_roots(q);
    double wsum = 0.0;
    for (int i = 0; i < q; ++i) {
      CHECK(x[i] == doctest::Approx(r[i]).epsilon(1e-13));
      wsum += w[i];
    }
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
    const auto cps = collocation_points(20, q);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      CHECK(cps[i] > 0.0);
      CHECK(cps[i] < 1.0);
      if (i > 0) CHECK(cps[i] > cps[i - 1]);
    }
  }
}

TEST_CASE("transcription dimensions") {
  const auto mp = testing::module(2);
  for (auto s : {Scheme::kSCT, Scheme::kDCT}) {
    const auto p = problem(s);
    const auto tr = transcribe(p, mp);
    const int N_s = tr->n_states();
    CHECK(N_s == 44);
    const int n_traj = N_s + tr->n_inputs() + p.n_tf();
    CHECK(n_traj == decision_variable_count(p, N_s));
    CHECK(tr->nlp.n == p.n_tf() + N_s * tr->x_basis.n_fp() + tr->n_inputs() * tr->u_basis.n_fp());
    CHECK(tr->x_basis.n_fp() == 20 * (tr->disc.states.order - tr->disc.states.smoothness) + tr->disc.states.smoothness);
    CHECK(tr->u_basis.n_fp() == 20 * (tr->disc.inputs.order - tr->disc.inputs.smoothness) + tr->disc.inputs.smoothness);
    CHECK(tr->cps.size() == 40);
  }
}

TEST_CASE("derivative audit") {
  const auto mp = testing::module(2);
  for (auto s : {Scheme::kSCT, Scheme::kDCT}) {
    const auto tr = transcribe(problem(s), mp);
    const auto r = testing::audit_derivatives(tr->nlp, 5, 11, 2, 4, 2);
    INFO("scheme " << to_string(s) << " obj " << r.objective << " jac " << r.jacobian << " hess " << r.hessian);
    CHECK(r.objective < 1e-6);
    CHECK(r.jacobian < 1e-6);
    CHECK(r.hessian < 1e-5);
  }
}

TEST_CASE("KKT residual definitions") {
  NlpProblem q;
  q.n = 2;
  q.m = 0;
  q.x_lo = {-kInf, -kInf};
  q.x_hi = {kInf, kInf};
  q.x0 = {0, 0};
  q.objective = [](const auto& x) { return x[0] * x[0] + x[1] * x[1]; };
  q.gradient = [](const auto& x, auto& g) { g = {2 * x[0], 2 * x[1]}; };
  q.constraints = [](const auto&, auto& c) { c.clear(); };
  q.jacobian = [](const auto&, Triplets&) {};
  Multipliers none;
  none.z_lo = none.z_hi = {0, 0};
  const auto k0 = kkt_residuals(q, {0, 0}, none);
  CHECK(k0.stationarity == 0.0);
  CHECK(k0.primal == 0.0);
  CHECK(k0.complementarity == 0.0);

  NlpProblem s;
  s.n = 1;
  s.m = 1;
  s.x_lo = {-kInf};
  s.x_hi = {kInf};
  s.c_lo = {2};
  s.c_hi = {kInf};
  s.x0 = {0};
  s.objective = [](const auto& x) { return (x[0] - 1) * (x[0] - 1); };
  s.gradient = [](const auto& x, auto& g) { g = {2 * (x[0] - 1)}; };
  s.constraints = [](const auto& x, auto& c) { c = {x[0]}; };
  s.jacobian = [](const auto&, Triplets& t) { t.emplace_back(0, 0, 1.0); };
  Multipliers m;
  m.lambda = {-2.0};
  m.y_lo = {2.0};
  m.y_hi = {0.0};
  m.z_lo = m.z_hi = {0.0};
  const auto k1 = kkt_residuals(s, {2.0}, m);
  CHECK(k1.stationarity == doctest::Approx(0.0));
  CHECK(k1.primal == 0.0);
  CHECK(k1.dual >= 0.0);
  CHECK(k1.complementarity == 0.0);
  // Inactive constraint with a nonzero multiplier: |mu * g|.
  m.lambda = {-0.5};
  m.y_lo = {0.5};
  const auto k2 = kkt_residuals(s, {3.0}, m);
  CHECK(k2.complementarity == doctest::Approx(0.5 * 1.0));
}

TEST_CASE("symmetric SCT problem balances equally") {
  const auto mp = testing::module(2);
  const auto tr = transcribe(problem(Scheme::kSCT, 0.3, 0.3), mp);
  const auto sol = solve(tr->nlp);
  REQUIRE(sol.optimal());
  for (int i = 0; i <= 20; ++i) {
    const double t = tr->horizon(sol.P) * i / 20.0;
    const auto in = tr->input_at(sol.P, t);
    CHECK(std::abs(in.I_B[0] - in.I_B[1]) < 1e-5);
  }
}

TEST_CASE("DCT finishes the fuller cell first") {
  const auto mp = testing::module(2);
  const auto tr = transcribe(problem(Scheme::kDCT), mp);
  const auto sol = solve(tr->nlp);
  REQUIRE(sol.optimal());
  const auto tf = tr->final_times(sol.P);
  CHECK(tf[1] < tf[0]);
  for (int k = 0; k < 2; ++k) CHECK(tr->soc_at(sol.P, k, tr->tau_final(k)) == doctest::Approx(0.8).epsilon(1e-6));
  // Past its final time the cell is bypassed.
  const auto in = tr->input_at(sol.P, 0.5 * (tf[0] + tf[1]));
  CHECK(in.I_cell(1) == doctest::Approx(0.0).epsilon(1e-12));
}

}  // TEST_SUITE
