#pragma once

// Central-difference audit of the transcription derivatives.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bmsopt/collocation.hpp"

namespace testing {

struct AuditResult {
  double objective = 0.0;  // worst relative error, objective gradient
  double jacobian = 0.0;   // worst relative error, constraint Jacobian
  double hessian = 0.0;    // worst relative error, Lagrangian Hessian-vector products
  int points = 0;
};

/// Random point near the initial guess, inside the variable bounds.
inline std::vector<double> random_point(const bmsopt::NlpProblem& nlp, std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> U(-spread, spread);
  auto P = nlp.x0;
  for (int j = 0; j < nlp.n; ++j) {
    P[j] += U(rng) * std::max(1.0, std::abs(P[j]));
    P[j] = std::clamp(P[j], nlp.x_lo[j], nlp.x_hi[j]);
  }
  return P;
}

/// Objective gradient in full; Jacobian along `dirs` random directions (which
/// touches every entry) plus `cols` random columns; Hessian along one random
/// direction with random multipliers on the first `hess_points` points.
inline AuditResult audit_derivatives(const bmsopt::NlpProblem& nlp, int n_points, std::uint64_t seed,
                                     int dirs = 2, int cols = 8, int hess_points = 3) {
  using bmsopt::Triplets;
  AuditResult res;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N01;
  std::uniform_int_distribution<int> col(0, nlp.n - 1);
  const double h = 1e-6;
  auto rel = [](double fd, double an, double scale) { return std::abs(fd - an) / std::max(1.0, scale); };

  for (int p = 0; p < n_points; ++p) {
    const auto P = random_point(nlp, rng, 0.05);
    std::vector<double> g(nlp.n);
    nlp.gradient(P, g);
    for (int j = 0; j < nlp.n; ++j) {
      auto Pp = P, Pm = P;
      const double hj = h * std::max(1.0, std::abs(P[j]));
      Pp[j] += hj;
      Pm[j] -= hj;
      const double fd = (nlp.objective(Pp) - nlp.objective(Pm)) / (2 * hj);
      res.objective = std::max(res.objective, rel(fd, g[j], std::abs(g[j])));
    }

    Triplets t;
    nlp.jacobian(P, t);
    const auto J = bmsopt::assemble(nlp.m, nlp.n, t);
    const Eigen::SparseMatrix<double> Jabs = J.cwiseAbs();
    std::vector<double> cp, cm;
    auto check_direction = [&](const Eigen::VectorXd& v) {
      auto Pp = P, Pm = P;
      for (int j = 0; j < nlp.n; ++j) {
        Pp[j] += h * v[j];
        Pm[j] -= h * v[j];
      }
      nlp.constraints(Pp, cp);
      nlp.constraints(Pm, cm);
      const Eigen::VectorXd an = J * v;
      const Eigen::VectorXd sc = Jabs * v.cwiseAbs();
      for (int i = 0; i < nlp.m; ++i) {
        res.jacobian = std::max(res.jacobian, rel((cp[i] - cm[i]) / (2 * h), an[i], sc[i]));
      }
    };
    for (int d = 0; d < dirs; ++d) {
      Eigen::VectorXd v(nlp.n);
      for (int j = 0; j < nlp.n; ++j) v[j] = N01(rng);
      v /= v.norm();
      check_direction(v);
    }
    for (int c = 0; c < cols; ++c) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(nlp.n);
      v[col(rng)] = 1.0;
      check_direction(v);
    }

    if (p < hess_points && nlp.hessian) {
      std::vector<double> lambda(nlp.m);
      for (auto& l : lambda) l = N01(rng);
      const double sigma = 1.0;
      Eigen::VectorXd v(nlp.n);
      for (int j = 0; j < nlp.n; ++j) v[j] = N01(rng);
      v /= v.norm();
      auto grad_L = [&](const std::vector<double>& X) {
        std::vector<double> gx(nlp.n);
        nlp.gradient(X, gx);
        Triplets tj;
        nlp.jacobian(X, tj);
        const auto JX = bmsopt::assemble(nlp.m, nlp.n, tj);
        Eigen::Map<const Eigen::VectorXd> lam(lambda.data(), nlp.m);
        Eigen::VectorXd out = JX.transpose() * lam;
        for (int j = 0; j < nlp.n; ++j) out[j] += sigma * nlp.obj_scale * gx[j];
        return out;
      };
      auto Pp = P, Pm = P;
      for (int j = 0; j < nlp.n; ++j) {
        Pp[j] += h * v[j];
        Pm[j] -= h * v[j];
      }
      const Eigen::VectorXd fd = (grad_L(Pp) - grad_L(Pm)) / (2 * h);
      Triplets th;
      nlp.hessian(P, sigma * nlp.obj_scale, lambda, th);
      const auto Hl = bmsopt::assemble(nlp.n, nlp.n, th);
      Eigen::SparseMatrix<double> H = Hl.selfadjointView<Eigen::Lower>();
      const Eigen::VectorXd an = H * v;
      const Eigen::SparseMatrix<double> Habs = H.cwiseAbs();
      const Eigen::VectorXd sc = Habs * v.cwiseAbs();
      for (int j = 0; j < nlp.n; ++j) res.hessian = std::max(res.hessian, rel(fd[j], an[j], sc[j]));
    }
    ++res.points;
  }
  return res;
}

}  // namespace testing
