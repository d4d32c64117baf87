#include "bmsopt/ocv_curve.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace bmsopt {

OcvCurve::OcvCurve(std::vector<double> stoich, std::vector<double> volts)
    : x_(std::move(stoich)), y_(std::move(volts)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) {
    throw std::invalid_argument("OCV curve needs at least two (stoichiometry, volts) pairs");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(x_[i] > x_[i - 1])) {
      throw std::invalid_argument("OCV stoichiometry column must be strictly increasing");
    }
  }
  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);

  m_.assign(n, 0.0);
  m_.front() = delta.front();
  m_.back() = delta.back();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      m_[i] = 0.0;
    } else {
      // Weighted harmonic mean keeps each cubic piece monotone.
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      const double w1 = 2.0 * h1 + h0;
      const double w2 = h1 + 2.0 * h0;
      m_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (delta[i] == 0.0) {
      m_[i] = m_[i + 1] = 0.0;
      continue;
    }
    const double a = m_[i] / delta[i];
    const double b = m_[i + 1] / delta[i];
    const double r = a * a + b * b;
    if (r > 9.0) {
      const double t = 3.0 / std::sqrt(r);
      m_[i] = t * a * delta[i];
      m_[i + 1] = t * b * delta[i];
    }
  }
}

OcvCurve OcvCurve::from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open OCV table " + path.string());
  std::vector<double> xs, ys;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    }
    std::istringstream ss(line);
    double x = 0.0, y = 0.0;
    if (!(ss >> x >> y)) {
      if (first) {
        first = false;
        continue;
      }
      throw std::runtime_error("malformed OCV row in " + path.string() + ": " + line);
    }
    first = false;
    xs.push_back(x);
    ys.push_back(y);
  }
  return OcvCurve(std::move(xs), std::move(ys));
}

}  // namespace bmsopt
