#include <doctest.h>

#include <algorithm>

#include "bmsopt/ocp.hpp"
#include "support.hpp"

using namespace bmsopt;

namespace {

ChargingProblem two_cells(Scheme s) {
  ChargingProblem p;
  p.scheme = s;
  p.initial = {{0.2, 5e-9, 2.0, 298.15}, {0.4, 5e-9, 2.0, 298.15}};
  return p;
}

int count(const std::vector<ConstraintDescriptor>& d, ConstraintKind k) {
  return static_cast<int>(std::count_if(d.begin(), d.end(), [k](const auto& c) { return c.kind == k; }));
}

}  // namespace

TEST_SUITE("ocp-spec") {

TEST_CASE("cost endpoints") {
  auto p = two_cells(Scheme::kDCT);
  const TerminalSummary s{{595.0, 393.0}, {5.2e-9, 5.1e-9}, {3e-13, 2e-13}};
  p.weights = {1.0, 2.0, 5e8, 7e8};
  auto c = cost(p, s);
  CHECK(c.h == doctest::Approx(494.0));
  CHECK(c.J == doctest::Approx(2.0 * 494.0).epsilon(1e-14));
  p.weights.alpha = 0.0;
  c = cost(p, s);
  CHECK(c.J == doctest::Approx(5e8 * 5.15e-9 + 7e8 * 2.5e-13).epsilon(1e-14));
  p.weights.alpha = 0.3;
  c = cost(p, s);
  CHECK(c.J == doctest::Approx(0.3 * 2.0 * 494.0 + 0.7 * (5e8 * 5.15e-9 + 7e8 * 2.5e-13)).epsilon(1e-14));
}

TEST_CASE("SCT uses the shared final time") {
  auto p = two_cells(Scheme::kSCT);
  const TerminalSummary s{{400.0, 400.0}, {5.2e-9, 5.1e-9}, {3e-13, 2e-13}};
  CHECK(cost(p, s).h == 400.0);
}

TEST_CASE("constraint descriptors") {
  const auto mp = testing::module(2);
  const auto sct = constraint_set(two_cells(Scheme::kSCT), mp);
  const auto dct = constraint_set(two_cells(Scheme::kDCT), mp);
  CHECK(count(sct, ConstraintKind::kFinalTimeBox) == 1);
  CHECK(count(dct, ConstraintKind::kFinalTimeBox) == 2);
  CHECK(count(dct, ConstraintKind::kTerminalSoc) == 2);
  for (const auto& c : dct) {
    if (c.kind == ConstraintKind::kTerminalSoc) {
      CHECK(c.equality());
      CHECK(c.lo == 0.8);
    }
  }
}

TEST_CASE("decision variable counts") {
  constexpr int N_s = 44;
  CHECK(decision_variable_count(two_cells(Scheme::kDCT), N_s) == N_s + 2 * 2 + 1);
  CHECK(decision_variable_count(two_cells(Scheme::kSCT), N_s) == N_s + 2 + 2);
  CHECK(StateLayout(testing::module(2), Fidelity::kSurrogate).size() == N_s);
}

TEST_CASE("cell-current layout") {
  const auto p = to_cell_current_layout(two_cells(Scheme::kDCT));
  CHECK(p.layout == VariableLayout::kCellCurrent);
  CHECK(p.bounds.I_cell_min == -16.0);
  CHECK(p.bounds.I_cell_max == -6.0);

  const std::vector<double> same{-12.0, -12.0};
  const auto in = reconstruct_input(same);
  CHECK(in.I_0 == -12.0);
  CHECK(in.I_B == std::vector<double>{0.0, 0.0});

  const std::vector<double> I{-14.0, -9.5, -12.0};
  const auto r = reconstruct_input(I);
  for (int k = 0; k < 3; ++k) {
    CHECK(r.I_cell(k) == doctest::Approx(I[k]).epsilon(1e-15));
    CHECK(r.I_B[k] <= 0.0);
    CHECK(r.I_B[k] == r.I_0 - I[k]);
  }
}

TEST_CASE("problem validation") {
  auto p = two_cells(Scheme::kDCT);
  CHECK_NOTHROW(p.validate());
  p.weights.alpha = 1.5;
  CHECK_THROWS(p.validate());
  p = two_cells(Scheme::kDCT);
  p.initial[0].soc = 0.9;
  CHECK_THROWS(p.validate());
  p = two_cells(Scheme::kDCT);
  p.weights.beta2 = 0.0;
  CHECK_THROWS(p.validate());
  p = two_cells(Scheme::kDCT);
  p.bounds.I_0_min = -10.0;
  p.bounds.I_0_max = -12.0;
  CHECK_THROWS(p.validate());
}

TEST_CASE("unreachable targets are rejected") {
  auto p = two_cells(Scheme::kDCT);
  p.bounds.t_f_max = 60.0;
  CHECK_THROWS_AS(check_reachable(p, testing::module(2)), InfeasibleProblem);
  CHECK_NOTHROW(check_reachable(two_cells(Scheme::kDCT), testing::module(2)));
}

TEST_CASE("json round trip") {
  auto p = two_cells(Scheme::kSCT);
  p.weights = {0.25, 1.0, 2e12, 2e14};
  p.soc_target = 0.75;
  const auto q = problem_from_json(to_json(p));
  CHECK(q.scheme == Scheme::kSCT);
  CHECK(q.weights.beta3 == 2e14);
  CHECK(q.soc_target == 0.75);
  CHECK(q.initial.size() == 2);
  CHECK(q.initial[1].soc == 0.4);
}

}  // TEST_SUITE
