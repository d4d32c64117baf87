#include <doctest.h>

#include <cmath>
#include <fstream>

#include "bmsopt/ip_solver.hpp"
#include "fixtures.hpp"
#include "support.hpp"

using namespace bmsopt;

TEST_SUITE("ip-solver") {

TEST_CASE("scalar inequality") {
  const auto nlp = testing::scalar_fixture();
  const auto sol = solve(nlp);
  REQUIRE(sol.optimal());
  CHECK(sol.P[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sol.mult.y_lo[0] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(sol.kkt.max() <= 1e-6);
  CHECK(sol.iterations < 100);
  CHECK(certify(nlp, sol).passed());
}

TEST_CASE("equality-constrained quadratic") {
  const auto sol = solve(testing::equality_fixture());
  REQUIRE(sol.optimal());
  CHECK(sol.P[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(sol.P[1] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(sol.kkt.max() <= 1e-6);
  CHECK(sol.iterations < 100);
}

TEST_CASE("constrained Rosenbrock against a grid scan") {
  const auto nlp = testing::rosenbrock_fixture();
  const auto sol = solve(nlp);
  REQUIRE(sol.optimal());
  CHECK(sol.kkt.max() <= 1e-6);
  CHECK(sol.iterations < 100);
  const auto g = testing::rosenbrock_grid();
  CHECK(std::abs(sol.objective - g.f) <= 1e-4);

  // The minimizer sits on the disc boundary with a zero multiplier, so the
  // barrier iterate approaches it like sqrt(mu); resolving positions to 1e-4
  // needs a tighter tolerance and a zoomed grid.
  SolverOptions tight;
  tight.tol = 1e-10;
  const auto fine = solve(nlp, tight);
  REQUIRE(fine.optimal());
  const auto gr = testing::rosenbrock_grid_refined();
  INFO("solver " << fine.P[0] << "," << fine.P[1] << " grid " << gr.x << "," << gr.y);
  CHECK(std::hypot(fine.P[0] - gr.x, fine.P[1] - gr.y) <= 1e-4);
  CHECK(std::abs(fine.objective - gr.f) <= 1e-8);
}

TEST_CASE("certificate detects perturbations") {
  const auto nlp = testing::scalar_fixture();
  const auto sol = solve(nlp);
  REQUIRE(certify(nlp, sol).passed());

  auto moved = sol;
  moved.P[0] += 1e-2;
  const auto c1 = certify(nlp, moved);
  CHECK(c1.kkt.stationarity >= 10 * c1.tol);
  CHECK_FALSE(c1.passed());

  auto dropped = sol;
  dropped.mult.lambda[0] = 0.0;
  dropped.mult.y_lo[0] = 0.0;
  const auto c2 = certify(nlp, dropped);
  CHECK(c2.kkt.stationarity > 1.0);
  CHECK(c2.kkt.complementarity == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_FALSE(c2.stationarity);
}

TEST_CASE("barrier parameter is monotone") {
  for (const auto& nlp : {testing::scalar_fixture(), testing::rosenbrock_fixture()}) {
    const auto sol = solve(nlp);
    REQUIRE(sol.history.size() > 1);
    for (std::size_t i = 1; i < sol.history.size(); ++i) CHECK(sol.history[i].mu <= sol.history[i - 1].mu);
  }
}

TEST_CASE("iteration log") {
  const auto sol = solve(testing::rosenbrock_fixture());
  const auto path = testing::scratch("iter") / "it.csv";
  std::filesystem::create_directories(path.parent_path());
  write_iterations_csv(sol.history, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("iter") == 0);
  CHECK(header.find("mu") != std::string::npos);
  CHECK(header.find("step") != std::string::npos);
}

TEST_CASE("infeasible and invalid problems") {
  auto nlp = testing::scalar_fixture();
  nlp.x_hi = {1.0};  // x <= 1 conflicts with x >= 2
  const auto sol = solve(nlp);
  CHECK_FALSE(sol.optimal());

  SolverOptions bad;
  bad.mu_factor = 2.0;
  CHECK_THROWS(solve(testing::scalar_fixture(), bad));
}

}  // TEST_SUITE
