#pragma once

// Generic nonlinear program
//   min  obj_scale * f(P)
//   s.t. c_lo <= c(P) <= c_hi   (rows with c_lo == c_hi are equalities)
//        x_lo <= P <= x_hi
// with sparse first and second derivatives supplied by the caller.

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

namespace bmsopt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using Triplets = std::vector<Eigen::Triplet<double>>;

struct NlpProblem {
  int n = 0;
  int m = 0;
  std::vector<double> x_lo, x_hi;
  std::vector<double> c_lo, c_hi;
  std::vector<double> x0;
  double obj_scale = 1.0;

  std::function<double(const std::vector<double>&)> objective;
  std::function<void(const std::vector<double>&, std::vector<double>&)> gradient;
  std::function<void(const std::vector<double>&, std::vector<double>&)> constraints;
  // Constraint Jacobian (m x n) as triplets; duplicates are summed.
  std::function<void(const std::vector<double>&, Triplets&)> jacobian;
  // Lower triangle of sigma * Hess(f) + sum_i lambda_i Hess(c_i).
  std::function<void(const std::vector<double>&, double sigma, const std::vector<double>& lambda,
                     Triplets&)>
      hessian;

  // Optional diagnostics.
  std::vector<std::string> var_names;
  std::vector<std::string> con_names;
  std::vector<double> var_scale;  // physical = offset + scale * P (informational)

  bool is_equality(int i) const { return c_lo[i] == c_hi[i]; }
  void validate() const;
};

/// Multipliers in the sign convention of the Lagrangian
///   obj_scale f + sum lambda_i c_i - z_lo^T (P - x_lo) + z_hi^T (P - x_hi)
/// where for inequality rows lambda_i = y_hi_i - y_lo_i with y >= 0.
struct Multipliers {
  std::vector<double> lambda;      // m
  std::vector<double> y_lo, y_hi;  // m, zero for equality rows
  std::vector<double> z_lo, z_hi;  // n
};

struct KktResiduals {
  double stationarity = 0.0;     // max |grad L|
  double primal = 0.0;           // max constraint / bound violation
  double dual = 0.0;             // smallest inequality multiplier (>= 0 when feasible)
  double complementarity = 0.0;  // max |mu_i * g_i| over inequalities

  double dual_violation() const { return dual < 0 ? -dual : 0.0; }
  double max() const;
};

/// The four first-order residuals at (P, multipliers), recomputed from fresh
/// model evaluations.
KktResiduals kkt_residuals(const NlpProblem& nlp, const std::vector<double>& P,
                           const Multipliers& mult);

/// Dense Jacobian by summing triplets (tests and small problems only).
Eigen::SparseMatrix<double> assemble(int rows, int cols, const Triplets& t);

}  // namespace bmsopt
