#include "bmsopt/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bmsopt {

SplineBasis::SplineBasis(int n_segments, int order, int smoothness)
    : n_segments_(n_segments), order_(order), smoothness_(smoothness) {
  if (n_segments < 1) throw std::invalid_argument("spline needs at least one segment");
  if (order < 1) throw std::invalid_argument("spline order must be >= 1");
  if (smoothness < 0 || smoothness >= order) {
    throw std::invalid_argument("spline smoothness must satisfy 0 <= s < d");
  }
  knots_.assign(order, 0.0);
  for (int b = 1; b < n_segments; ++b) {
    const double t = static_cast<double>(b) / n_segments;
    for (int r = 0; r < order - smoothness; ++r) knots_.push_back(t);
  }
  for (int r = 0; r < order; ++r) knots_.push_back(1.0);
}

std::vector<double> SplineBasis::breakpoints() const {
  std::vector<double> b(n_segments_ + 1);
  for (int i = 0; i <= n_segments_; ++i) b[i] = static_cast<double>(i) / n_segments_;
  return b;
}

int SplineBasis::span_of(double tau) const {
  const int p = order_ - 1;
  const int n = n_fp();  // number of basis functions
  if (tau >= knots_[n]) return n - 1;
  if (tau <= knots_[p]) return p;
  // Last index i with knots[i] <= tau.
  const auto it = std::upper_bound(knots_.begin() + p, knots_.begin() + n + 1, tau);
  return static_cast<int>(it - knots_.begin()) - 1;
}

int SplineBasis::eval(double tau, double* values, double* derivs) const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::domain_error("spline evaluated outside [0,1]");
  const int p = order_ - 1;
  const int i = span_of(tau);
  // Triangular table of lower-degree basis values (The NURBS Book, A2.3).
  std::vector<double> left(p + 1), right(p + 1);
  std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = tau - knots_[i + 1 - j];
    right[j] = knots_[i + j] - tau;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double tmp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    ndu[j][j] = saved;
  }
  for (int j = 0; j <= p; ++j) values[j] = ndu[j][p];
  if (derivs) {
    for (int r = 0; r <= p; ++r) {
      double d = 0.0;
      if (p >= 1) {
        // First derivative from the degree p-1 basis.
        if (r >= 1) d += ndu[r - 1][p - 1] / ndu[p][r - 1];
        if (r <= p - 1) d -= ndu[r][p - 1] / ndu[p][r];
        d *= p;
      }
      derivs[r] = d;
    }
  }
  return i - p;
}

double SplineBasis::value(std::span<const double> omega, double tau, int derivative) const {
  if (static_cast<int>(omega.size()) != n_fp()) throw std::invalid_argument("spline: wrong coefficient count");
  if (derivative < 0 || derivative > 1) throw std::invalid_argument("spline: derivative order must be 0 or 1");
  std::vector<double> v(order_), d(order_);
  const int j0 = eval(tau, v.data(), d.data());
  double s = 0.0;
  for (int r = 0; r < order_; ++r) s += (derivative ? d[r] : v[r]) * omega[j0 + r];
  return s;
}

std::vector<double> SplineBasis::greville() const {
  std::vector<double> g(n_fp());
  const int p = order_ - 1;
  for (int j = 0; j < n_fp(); ++j) {
    if (p == 0) {
      g[j] = 0.5 * (knots_[j] + knots_[j + 1]);
      continue;
    }
    double s = 0.0;
    for (int r = 1; r <= p; ++r) s += knots_[j + r];
    g[j] = s / p;
  }
  return g;
}

double bspline_eval(const SplineTrajectory& traj, double tau, int derivative_order) {
  return traj.basis.value(traj.omega, tau, derivative_order);
}

void gauss_legendre(int q, std::vector<double>& nodes, std::vector<double>& weights) {
  if (q < 1) throw std::invalid_argument("need at least one Gauss point");
  nodes.assign(q, 0.0);
  weights.assign(q, 0.0);
  for (int i = 0; i < q; ++i) {
    // Newton on P_q from the Chebyshev-like initial guess.
    double x = -std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= q; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (q == 1) p0 = 1.0;
      dp = q * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  std::sort(nodes.begin(), nodes.end());
}

std::vector<double> collocation_points(int n_segments, int q) {
  if (n_segments < 1) throw std::invalid_argument("need at least one segment");
  std::vector<double> x, w;
  gauss_legendre(q, x, w);
  std::vector<double> pts;
  pts.reserve(n_segments * q);
  for (int s = 0; s < n_segments; ++s) {
    const double a = static_cast<double>(s) / n_segments;
    const double h = 1.0 / n_segments;
    for (double xi : x) pts.push_back(a + 0.5 * h * (1.0 + xi));
  }
  return pts;
}

}  // namespace bmsopt
