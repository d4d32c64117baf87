#include "bmsopt/surrogate.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <Eigen/Dense>

#include "bmsopt/module_model.hpp"

namespace bmsopt {

void warn_once(const std::string& key, const std::string& message) {
  static std::mutex mu;
  static std::set<std::string> seen;
  std::lock_guard<std::mutex> lock(mu);
  if (seen.insert(key).second) std::clog << "warning: " << message << '\n';
}

double SurrogateModel::poly(std::size_t row, double xi) const { return row_value(row, xi); }

nlohmann::json SurrogateModel::to_json() const {
  nlohmann::json j;
  j["degree"] = kDegree;
  j["variable"] = {{"I_center", I_center}, {"I_scale", I_scale}};
  j["envelope"] = {{"I_lo", I_lo}, {"I_hi", I_hi}, {"T_lo", temperatures.front()},
                   {"T_hi", temperatures.back()}};
  j["temperatures"] = temperatures;
  j["currents"] = currents;
  j["coefficients"] = coeffs;
  j["residuals"] = residuals;
  return j;
}

SurrogateModel SurrogateModel::from_json(const nlohmann::json& j) {
  SurrogateModel m;
  if (j.value("degree", kDegree) != kDegree) {
    throw std::invalid_argument("surrogate file has an unsupported polynomial degree");
  }
  m.I_center = j.at("variable").at("I_center");
  m.I_scale = j.at("variable").at("I_scale");
  m.I_lo = j.at("envelope").at("I_lo");
  m.I_hi = j.at("envelope").at("I_hi");
  m.temperatures = j.at("temperatures").get<std::vector<double>>();
  m.currents = j.at("currents").get<std::vector<double>>();
  m.coeffs = j.at("coefficients").get<std::vector<Coeffs>>();
  m.residuals = j.value("residuals", std::vector<std::vector<double>>{});
  if (m.coeffs.size() != m.temperatures.size() || m.coeffs.empty()) {
    throw std::invalid_argument("surrogate file: one coefficient row per temperature required");
  }
  return m;
}

void SurrogateModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

SurrogateModel SurrogateModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open surrogate file " + path.string());
  return from_json(nlohmann::json::parse(in));
}

WindowRun run_charge_window(const CellParameters& cell, double I_cell, double T_amb,
                            ChargeWindow window, double L_sei0, const double* c_solv_fixed) {
  ModuleParameters mp;
  mp.cells = {cell};
  mp.T_amb = T_amb;
  const Fidelity mode = c_solv_fixed ? Fidelity::kSurrogate : Fidelity::kHighFidelity;
  if (c_solv_fixed) mp.solvent.fixed = {*c_solv_fixed};
  const auto init = CellState::at_rest(cell, window.soc_init, T_amb, L_sei0, cell.Q_nom,
                                       mode == Fidelity::kHighFidelity);
  SimulationOptions opt;
  opt.sample_dt = 0.0;
  opt.soc_cutoff = window.soc_target;
  opt.horizon = 2.0 * 3600.0 * cell.Q_nom * (window.soc_target - window.soc_init) / std::abs(I_cell);
  const auto tr = simulate(mp, ModuleState::from_cells(mp, {init}, mode),
                           [I_cell](double) { return ModuleInput{I_cell, {0.0}}; }, opt);
  if (tr.done_time[0] < 0) throw std::runtime_error("calibration charge did not reach the target SOC");
  return {tr.final_state()[tr.layout.L_sei(0)], tr.done_time[0]};
}

CalibrationSample calibrate_point(const CellParameters& cell, double I_cell, double T_amb,
                                  ChargeWindow window, double L_sei0) {
  if (!(I_cell < 0)) throw std::invalid_argument("calibrate_point: charging current must be negative");
  const auto hf = run_charge_window(cell, I_cell, T_amb, window, L_sei0, nullptr);
  const auto gap = [&](double c) {
    return std::abs(hf.L_end - run_charge_window(cell, I_cell, T_amb, window, L_sei0, &c).L_end);
  };
  const double c0 = cell.aging.eps_sei * cell.aging.c_solv_bulk;
  double a = 0.0, b = 2.0 * c0;
  // The bracket must straddle the root of the signed gap.
  const double lo_end = run_charge_window(cell, I_cell, T_amb, window, L_sei0, &a).L_end;
  const double hi_end = run_charge_window(cell, I_cell, T_amb, window, L_sei0, &b).L_end;
  if (!((lo_end - hf.L_end) * (hi_end - hf.L_end) <= 0.0)) {
    throw std::runtime_error("calibrate_point: [0, 2*eps_sei*c_solv_bulk] does not bracket the "
                             "matching concentration (I=" + std::to_string(I_cell) +
                             " A, T=" + std::to_string(T_amb) + " K, L_hf=" +
                             std::to_string(hf.L_end) + ", L_lf range [" + std::to_string(lo_end) +
                             ", " + std::to_string(hi_end) + "])");
  }
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = gap(x1), f2 = gap(x2);
  while (b - a > 1e-6 * c0) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = gap(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = gap(x2);
    }
  }
  CalibrationSample s;
  s.I_cell = I_cell;
  s.T_amb = T_amb;
  s.c_solv = 0.5 * (a + b);
  s.L_hf = hf.L_end;
  s.L_lf = run_charge_window(cell, I_cell, T_amb, window, L_sei0, &s.c_solv).L_end;
  s.rel_residual = std::abs(s.L_hf - s.L_lf) / s.L_hf;
  s.t_end = hf.t_end;
  return s;
}

SurrogateModel fit(const std::vector<CalibrationSample>& samples) {
  std::map<double, std::vector<const CalibrationSample*>> by_T;
  for (const auto& s : samples) by_T[s.T_amb].push_back(&s);
  if (by_T.empty()) throw std::invalid_argument("fit: no samples");
  SurrogateModel m;
  constexpr int P = SurrogateModel::kDegree + 1;
  {
    const auto& first = by_T.begin()->second;
    for (const auto* s : first) m.currents.push_back(s->I_cell);
    std::sort(m.currents.begin(), m.currents.end());
    if (static_cast<int>(m.currents.size()) < P) {
      throw std::invalid_argument("fit: a quintic needs at least 6 currents per temperature");
    }
    for (std::size_t i = 1; i < m.currents.size(); ++i) {
      if (m.currents[i] == m.currents[i - 1]) {
        throw std::invalid_argument("fit: duplicated currents make the fit rank deficient");
      }
    }
    m.I_lo = m.currents.front();
    m.I_hi = m.currents.back();
    m.I_center = 0.5 * (m.I_lo + m.I_hi);
    m.I_scale = 0.5 * (m.I_hi - m.I_lo);
  }
  for (const auto& [T, rows] : by_T) {
    std::vector<const CalibrationSample*> sorted = rows;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto* a, const auto* b) { return a->I_cell < b->I_cell; });
    if (sorted.size() != m.currents.size()) {
      throw std::invalid_argument("fit: every temperature must use the same current grid");
    }
    const int n = static_cast<int>(sorted.size());
    Eigen::MatrixXd V(n, P);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      if (sorted[i]->I_cell != m.currents[i]) {
        throw std::invalid_argument("fit: every temperature must use the same current grid");
      }
      const double xi = (sorted[i]->I_cell - m.I_center) / m.I_scale;
      double pw = 1.0;
      for (int c = 0; c < P; ++c, pw *= xi) V(i, c) = pw;
      y(i) = sorted[i]->c_solv;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    if (qr.rank() < P) throw std::invalid_argument("fit: rank-deficient Vandermonde system");
    const Eigen::VectorXd a = qr.solve(y);
    SurrogateModel::Coeffs c{};
    for (int i = 0; i < P; ++i) c[i] = a(i);
    m.temperatures.push_back(T);
    m.coeffs.push_back(c);
    std::vector<double> res(n);
    const Eigen::VectorXd r = V * a - y;
    for (int i = 0; i < n; ++i) res[i] = r(i);
    m.residuals.push_back(std::move(res));
  }
  return m;
}

std::vector<std::pair<double, double>> default_training_grid(double Q_nom) {
  std::vector<std::pair<double, double>> grid;
  for (double T : {288.15, 298.15, 308.15}) {
    for (int c = 3; c <= 8; ++c) grid.emplace_back(-c * Q_nom, T);
  }
  return grid;
}

SurrogateModel build_surrogate(const CellParameters& cell,
                               const std::vector<std::pair<double, double>>& grid, int jobs,
                               std::vector<CalibrationSample>* samples_out) {
  std::vector<CalibrationSample> samples(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        samples[i] = calibrate_point(cell, grid[i].first, grid[i].second);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(grid.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (samples_out) *samples_out = samples;
  return fit(samples);
}

}  // namespace bmsopt
