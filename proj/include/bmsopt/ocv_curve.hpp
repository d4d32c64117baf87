#pragma once

#include <algorithm>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmsopt/ad.hpp"

namespace bmsopt {

/// Open-circuit potential versus surface stoichiometry, stored as a monotone
/// piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes). Queries
/// outside the tabulated interval throw instead of extrapolating.
class OcvCurve {
 public:
  OcvCurve() = default;
  OcvCurve(std::vector<double> stoich, std::vector<double> volts);

  /// Reads a two-column CSV (stoichiometry, volts). A non-numeric first
  /// line is treated as a header.
  static OcvCurve from_csv(const std::filesystem::path& path);

  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }
  bool empty() const { return x_.empty(); }
  bool covers(double a, double b) const {
    return !x_.empty() && std::min(a, b) >= lo() && std::max(a, b) <= hi();
  }

  const std::vector<double>& stoichiometry() const { return x_; }
  const std::vector<double>& volts() const { return y_; }

  template <typename S>
  S operator()(const S& theta) const {
    const double t = value_of(theta);
    if (!(t >= x_.front() && t <= x_.back())) {
      throw std::domain_error("OCV curve queried at stoichiometry " + std::to_string(t) +
                              " outside [" + std::to_string(lo()) + ", " +
                              std::to_string(hi()) + "]");
    }
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - x_.begin());
    k = std::clamp<std::size_t>(k, 1, x_.size() - 1) - 1;
    const double h = x_[k + 1] - x_[k];
    const S s = (theta - x_[k]) / h;
    const S s2 = s * s;
    const S s3 = s2 * s;
    const S h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const S h10 = s3 - 2.0 * s2 + s;
    const S h01 = -2.0 * s3 + 3.0 * s2;
    const S h11 = s3 - s2;
    return h00 * y_[k] + h10 * (h * m_[k]) + h01 * y_[k + 1] + h11 * (h * m_[k + 1]);
  }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_;
};

}  // namespace bmsopt
