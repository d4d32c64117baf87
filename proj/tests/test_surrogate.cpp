#include <doctest.h>

#include <cmath>
#include <random>

#include "bmsopt/surrogate.hpp"
#include "support.hpp"

using namespace bmsopt;
using testing::cell;

namespace {

std::vector<CalibrationSample> quintic_samples(const std::vector<std::array<double, 6>>& rows,
                                               const std::vector<double>& temps) {
  std::vector<CalibrationSample> s;
  for (std::size_t t = 0; t < temps.size(); ++t) {
    for (int c = 3; c <= 8; ++c) {
      const double I = -2.0 * c;
      const double xi = (I + 11.0) / 5.0;  // centre and half-width of [-16, -6]
      double v = 0.0, pw = 1.0;
      for (double a : rows[t]) {
        v += a * pw;
        pw *= xi;
      }
      s.push_back({I, temps[t], v, 0.0, 0.0, 0.0, 0.0});
    }
  }
  return s;
}

}  // namespace

TEST_SUITE("surrogate") {

TEST_CASE("fit recovers a quintic exactly") {
  const std::vector<std::array<double, 6>> rows{{3000, 200, -50, 10, 4, -1}, {2500, 150, -20, 8, 2, 0.5}};
  const std::vector<double> temps{288.15, 308.15};
  const auto m = fit(quintic_samples(rows, temps));
  REQUIRE(m.coeffs.size() == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    for (int c = 0; c < 6; ++c) {
      CHECK(std::abs(m.coeffs[t][c] - rows[t][c]) <= 1e-10 * std::max(1.0, std::abs(rows[t][c])));
    }
    for (double r : m.residuals[t]) CHECK(std::abs(r) < 1e-10);
  }
  // Training point and log-linear interpolation in 1/T.
  CHECK(m.evaluate(-8.0, 288.15) == doctest::Approx(quintic_samples(rows, temps)[1].c_solv).epsilon(1e-12));
  const double Tm = 2.0 / (1.0 / 288.15 + 1.0 / 308.15);
  const double lo = m.evaluate(-9.0, 288.15), hi = m.evaluate(-9.0, 308.15);
  CHECK(m.evaluate(-9.0, Tm) == doctest::Approx(std::sqrt(lo * hi)).epsilon(1e-12));
}

TEST_CASE("fit rejects ill-posed data") {
  CHECK_THROWS_AS(fit({}), std::invalid_argument);
  auto s = quintic_samples({{1, 0, 0, 0, 0, 0}}, {298.15});
  s.pop_back();
  CHECK_THROWS_AS(fit(s), std::invalid_argument);
}

TEST_CASE("save and load round trip") {
  const auto& m = testing::surrogate();
  const auto path = testing::scratch("sur") / "s.json";
  std::filesystem::create_directories(path.parent_path());
  m.save(path);
  const auto back = SurrogateModel::load(path);
  for (double I : {-15.0, -11.3, -6.5}) {
    for (double T : {288.15, 300.0, 308.15}) CHECK(back.evaluate(I, T) == m.evaluate(I, T));
  }
}

TEST_CASE("terminal thickness is monotone in the surface concentration") {
  const auto& p = cell();
  const double cmax = p.aging.eps_sei * p.aging.c_solv_bulk;
  double prev = -1.0;
  bool monotone = true;
  for (int i = 1; i <= 200; ++i) {
    const double c = cmax * i / 200.0;
    const auto r = run_charge_window(p, -10.0, 298.15, {}, 5e-9, &c);
    monotone = monotone && r.L_end > prev;
    prev = r.L_end;
  }
  CHECK(monotone);
}

TEST_CASE("negligible solvent consumption calibrates to the bulk value") {
  // With almost no side reaction the full model keeps its surface at the
  // initial porous-bulk concentration, which is then the matching value.
  auto p = cell();
  p.aging.k_f *= 1e-6;
  const auto s = calibrate_point(p, -10.0, 298.15);
  const double bulk = p.aging.eps_sei * p.aging.c_solv_bulk;
  CHECK(s.c_solv == doctest::Approx(bulk).epsilon(1e-3));
  CHECK(s.rel_residual < 1e-9);
}

TEST_CASE("surrogate charge at 5C and 25 C matches the full model") {
  const auto& p = cell();
  const double c = testing::surrogate().evaluate(-10.0, 298.15);
  const auto hf = run_charge_window(p, -10.0, 298.15, {}, 5e-9, nullptr);
  const auto lf = run_charge_window(p, -10.0, 298.15, {}, 5e-9, &c);
  CHECK(std::abs(hf.L_end - lf.L_end) / hf.L_end < 1e-2);
}

TEST_CASE("envelope handling") {
  const auto& m = testing::surrogate();
  CHECK(m.evaluate(-20.0, 298.15) == m.evaluate(m.I_lo, 298.15));
  CHECK(m.evaluate(-10.0, 250.0) == m.evaluate(-10.0, m.temperatures.front()));
  CHECK_THROWS_AS(SurrogateModel{}.evaluate(-10.0, 298.15), std::logic_error);
}

}  // TEST_SUITE
