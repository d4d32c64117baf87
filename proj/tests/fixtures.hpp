#pragma once

// Small NLPs with known solutions.

#include "bmsopt/nlp.hpp"

namespace testing {

using bmsopt::kInf;
using bmsopt::NlpProblem;
using bmsopt::Triplets;

/// min (x - 1)^2  s.t.  x >= 2; x* = 2, multiplier 2.
inline NlpProblem scalar_fixture() {
  NlpProblem p;
  p.n = 1;
  p.m = 1;
  p.x_lo = {-kInf};
  p.x_hi = {kInf};
  p.c_lo = {2};
  p.c_hi = {kInf};
  p.x0 = {0};
  p.objective = [](const auto& x) { return (x[0] - 1) * (x[0] - 1); };
  p.gradient = [](const auto& x, auto& g) { g = {2 * (x[0] - 1)}; };
  p.constraints = [](const auto& x, auto& c) { c = {x[0]}; };
  p.jacobian = [](const auto&, Triplets& t) { t.emplace_back(0, 0, 1.0); };
  p.hessian = [](const auto&, double s, const auto&, Triplets& t) { t.emplace_back(0, 0, 2 * s); };
  return p;
}

/// min |x|^2  s.t.  x1 + x2 = 1; x* = (0.5, 0.5).
inline NlpProblem equality_fixture() {
  NlpProblem p;
  p.n = 2;
  p.m = 1;
  p.x_lo = {-kInf, -kInf};
  p.x_hi = {kInf, kInf};
  p.c_lo = {1};
  p.c_hi = {1};
  p.x0 = {0, 0};
  p.objective = [](const auto& x) { return x[0] * x[0] + x[1] * x[1]; };
  p.gradient = [](const auto& x, auto& g) { g = {2 * x[0], 2 * x[1]}; };
  p.constraints = [](const auto& x, auto& c) { c = {x[0] + x[1]}; };
  p.jacobian = [](const auto&, Triplets& t) {
    t.emplace_back(0, 0, 1.0);
    t.emplace_back(0, 1, 1.0);
  };
  p.hessian = [](const auto&, double s, const auto&, Triplets& t) {
    t.emplace_back(0, 0, 2 * s);
    t.emplace_back(1, 1, 2 * s);
  };
  return p;
}

inline double rosenbrock(double x, double y) { return (1 - x) * (1 - x) + 100 * (y - x * x) * (y - x * x); }

/// Rosenbrock inside the disc x^2 + y^2 <= 2.
inline NlpProblem rosenbrock_fixture() {
  NlpProblem p;
  p.n = 2;
  p.m = 1;
  p.x_lo = {-kInf, -kInf};
  p.x_hi = {kInf, kInf};
  p.c_lo = {-kInf};
  p.c_hi = {2};
  p.x0 = {-1.2, 1};
  p.objective = [](const auto& v) { return rosenbrock(v[0], v[1]); };
  p.gradient = [](const auto& v, auto& g) {
    const double x = v[0], y = v[1];
    g = {-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x)};
  };
  p.constraints = [](const auto& v, auto& c) { c = {v[0] * v[0] + v[1] * v[1]}; };
  p.jacobian = [](const auto& v, Triplets& t) {
    t.emplace_back(0, 0, 2 * v[0]);
    t.emplace_back(0, 1, 2 * v[1]);
  };
  p.hessian = [](const auto& v, double s, const auto& l, Triplets& t) {
    const double x = v[0], y = v[1];
    t.emplace_back(0, 0, s * (2 - 400 * y + 1200 * x * x) + 2 * l[0]);
    t.emplace_back(1, 0, -400 * s * x);
    t.emplace_back(1, 1, 200 * s + 2 * l[0]);
  };
  return p;
}

struct GridMinimum {
  double x, y, f;
};

/// Brute-force scan of [x0, x0 + w] x [y0, y0 + w] on an n x n grid, disc
/// constraint kept. Defaults cover [-1.5, 1.5]^2.
inline GridMinimum rosenbrock_grid(int n = 2000, double x0 = -1.5, double y0 = -1.5, double w = 3.0) {
  GridMinimum best{0, 0, 1e300};
  for (int i = 0; i < n; ++i) {
    const double x = x0 + w * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      const double y = y0 + w * j / (n - 1);
      if (x * x + y * y > 2.0) continue;
      const double f = rosenbrock(x, y);
      if (f < best.f) best = {x, y, f};
    }
  }
  return best;
}

/// Coarse scan followed by a zoomed scan around the coarse winner.
inline GridMinimum rosenbrock_grid_refined(int n = 2000) {
  const auto c = rosenbrock_grid(n);
  const double h = 3.0 / (n - 1);
  // The valley is flat along (1, 2x); widen the window to cover it.
  const double w = 40 * h;
  return rosenbrock_grid(n, c.x - w / 2, c.y - w / 2, w);
}

}  // namespace testing
