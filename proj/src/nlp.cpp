#include "bmsopt/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bmsopt {

void NlpProblem::validate() const {
  if (n <= 0 || m < 0) throw std::invalid_argument("NLP dimensions must be positive");
  if (static_cast<int>(x_lo.size()) != n || static_cast<int>(x_hi.size()) != n ||
      static_cast<int>(x0.size()) != n) {
    throw std::invalid_argument("NLP variable bounds / initial guess have the wrong length");
  }
  if (static_cast<int>(c_lo.size()) != m || static_cast<int>(c_hi.size()) != m) {
    throw std::invalid_argument("NLP constraint bounds have the wrong length");
  }
  for (int i = 0; i < n; ++i) {
    if (!(x_lo[i] <= x_hi[i])) throw std::invalid_argument("empty bound interval on variable " + std::to_string(i));
  }
  for (int i = 0; i < m; ++i) {
    if (!(c_lo[i] <= c_hi[i])) throw std::invalid_argument("empty bound interval on constraint " + std::to_string(i));
  }
  if (!objective || !gradient || (m > 0 && (!constraints || !jacobian)) || !hessian) {
    throw std::invalid_argument("NLP callbacks missing");
  }
  if (!(obj_scale > 0)) throw std::invalid_argument("objective scale must be positive");
}

double KktResiduals::max() const {
  return std::max({stationarity, primal, dual_violation(), complementarity});
}

Eigen::SparseMatrix<double> assemble(int rows, int cols, const Triplets& t) {
  Eigen::SparseMatrix<double> A(rows, cols);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

KktResiduals kkt_residuals(const NlpProblem& nlp, const std::vector<double>& P,
                           const Multipliers& mu) {
  const int n = nlp.n, m = nlp.m;
  std::vector<double> g(n, 0.0), c(m, 0.0);
  nlp.gradient(P, g);
  KktResiduals r;
  std::vector<double> grad_L(n);
  for (int i = 0; i < n; ++i) grad_L[i] = nlp.obj_scale * g[i];
  if (m > 0) {
    nlp.constraints(P, c);
    Triplets t;
    nlp.jacobian(P, t);
    for (const auto& e : t) {
      const int i = e.row();
      const double w = nlp.is_equality(i) ? mu.lambda.at(i) : mu.y_hi.at(i) - mu.y_lo.at(i);
      grad_L[e.col()] += w * e.value();
    }
  }
  const auto z = [](const std::vector<double>& v, int i) { return v.empty() ? 0.0 : v[i]; };
  for (int i = 0; i < n; ++i) {
    grad_L[i] += -z(mu.z_lo, i) + z(mu.z_hi, i);
    r.stationarity = std::max(r.stationarity, std::abs(grad_L[i]));
  }
  double min_mult = kInf;
  const auto inequality = [&](double mult, double slack) {
    // slack = g_i <= 0 when feasible
    r.primal = std::max(r.primal, std::max(0.0, slack));
    min_mult = std::min(min_mult, mult);
    r.complementarity = std::max(r.complementarity, std::abs(mult * slack));
  };
  for (int i = 0; i < m; ++i) {
    if (nlp.is_equality(i)) {
      r.primal = std::max(r.primal, std::abs(c[i] - nlp.c_lo[i]));
      continue;
    }
    if (std::isfinite(nlp.c_lo[i])) inequality(z(mu.y_lo, i), nlp.c_lo[i] - c[i]);
    if (std::isfinite(nlp.c_hi[i])) inequality(z(mu.y_hi, i), c[i] - nlp.c_hi[i]);
  }
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(nlp.x_lo[i])) inequality(z(mu.z_lo, i), nlp.x_lo[i] - P[i]);
    if (std::isfinite(nlp.x_hi[i])) inequality(z(mu.z_hi, i), P[i] - nlp.x_hi[i]);
  }
  r.dual = std::isfinite(min_mult) ? min_mult : 0.0;
  return r;
}

}  // namespace bmsopt
