#pragma once

#include <span>
#include <vector>

namespace bmsopt {

/// Clamped B-spline basis on tau in [0,1] with uniform breakpoints. Order d
/// (degree d-1), smoothness s: the spline is C^(s-1) at interior breakpoints,
/// which carry knot multiplicity d-s.
class SplineBasis {
 public:
  SplineBasis() = default;
  SplineBasis(int n_segments, int order, int smoothness);

  int n_segments() const { return n_segments_; }
  int order() const { return order_; }
  int smoothness() const { return smoothness_; }
  int n_fp() const { return n_segments_ * (order_ - smoothness_) + smoothness_; }
  const std::vector<double>& knots() const { return knots_; }
  std::vector<double> breakpoints() const;

  /// Nonzero basis functions at tau: returns the index of the first one and
  /// fills `order()` values (and first derivatives when `derivs` is given).
  int eval(double tau, double* values, double* derivs = nullptr) const;

  double value(std::span<const double> omega, double tau, int derivative = 0) const;

  /// Greville abscissae (control point locations).
  std::vector<double> greville() const;

 private:
  int span_of(double tau) const;

  int n_segments_ = 0;
  int order_ = 0;
  int smoothness_ = 0;
  std::vector<double> knots_;
};

struct SplineTrajectory {
  SplineBasis basis;
  std::vector<double> omega;
};

/// Cox-de Boor evaluation; derivative_order 0 or 1.
double bspline_eval(const SplineTrajectory& traj, double tau, int derivative_order = 0);

/// Legendre-Gauss nodes on [-1, 1] (ascending) and their weights.
void gauss_legendre(int q, std::vector<double>& nodes, std::vector<double>& weights);

/// q Gauss nodes mapped into each of n_segments equal segments of [0,1].
std::vector<double> collocation_points(int n_segments, int q);

}  // namespace bmsopt
