#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bmsopt/ad.hpp"
#include "bmsopt/cell_params.hpp"

namespace bmsopt {

void warn_once(const std::string& key, const std::string& message);

/// Constant surface solvent concentration c_solv*(I_cell, T_amb) that makes
/// the reduced model reproduce the terminal SEI thickness of the full
/// solvent-diffusion model. One quintic in current per ambient temperature;
/// across temperature ln(c) is interpolated linearly in 1/T.
struct SurrogateModel {
  static constexpr int kDegree = 5;
  using Coeffs = std::array<double, kDegree + 1>;

  // Polynomial variable is xi = (I - I_center) / I_scale.
  double I_center = 0.0;
  double I_scale = 1.0;
  double I_lo = 0.0;
  double I_hi = 0.0;
  std::vector<double> temperatures;  // ascending [K]
  std::vector<Coeffs> coeffs;        // one row per temperature, ascending powers
  std::vector<double> currents;      // training currents [A]
  std::vector<std::vector<double>> residuals;  // [temperature][sample]

  bool fitted() const { return !coeffs.empty(); }

  double poly(std::size_t row, double xi) const;

  template <typename S>
  S evaluate(const S& I_cell, double T_amb) const {
    if (!fitted()) throw std::logic_error("surrogate model has not been fitted");
    const double I = value_of(I_cell);
    double T = T_amb;
    if (T < temperatures.front() || T > temperatures.back()) {
      warn_once("surrogate-T", "surrogate queried outside its temperature envelope; clamping");
      T = std::min(std::max(T, temperatures.front()), temperatures.back());
    }
    S xi;
    if (I < I_lo || I > I_hi) {
      // Envelope edge: constant continuation, no sensitivity to current.
      xi = S((std::min(std::max(I, I_lo), I_hi) - I_center) / I_scale);
    } else {
      xi = (I_cell - I_center) / I_scale;
    }
    std::size_t k = 0;
    while (k + 2 < temperatures.size() && T > temperatures[k + 1]) ++k;
    S value = row_value(k, xi);
    if (temperatures.size() > 1 && T > temperatures[k]) {
      const double T0 = temperatures[k], T1 = temperatures[k + 1];
      const S upper = row_value(k + 1, xi);
      if (value_of(value) > 0.0 && value_of(upper) > 0.0) {
        // Log-linear in 1/T: exact for Arrhenius-type dependence.
        using std::exp;
        using std::log;
        const double w = (1.0 / T - 1.0 / T0) / (1.0 / T1 - 1.0 / T0);
        value = exp((1.0 - w) * log(value) + w * log(upper));
      } else {
        const double w = (T - T0) / (T1 - T0);
        value = (1.0 - w) * value + w * upper;
      }
    }
    if (value_of(value) < 0.0) {
      warn_once("surrogate-neg", "surrogate produced a negative concentration; clamping at 0");
      return S(0.0);
    }
    return value;
  }

  nlohmann::json to_json() const;
  static SurrogateModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static SurrogateModel load(const std::filesystem::path& path);

 private:
  template <typename S>
  S row_value(std::size_t row, const S& xi) const {
    const Coeffs& c = coeffs[row];
    S acc(c[kDegree]);
    for (int i = kDegree - 1; i >= 0; --i) acc = acc * xi + c[i];
    return acc;
  }
};

struct ChargeWindow {
  double soc_init = 0.2;
  double soc_target = 0.8;
};

struct CalibrationSample {
  double I_cell;
  double T_amb;
  double c_solv;
  double L_hf;          // terminal thickness, full solvent model
  double L_lf;          // terminal thickness, constant c_solv
  double rel_residual;  // |L_hf - L_lf| / L_hf
  double t_end;
};

/// Golden-section search for the constant surface solvent concentration
/// that matches the high-fidelity terminal SEI thickness at constant current.
CalibrationSample calibrate_point(const CellParameters& cell, double I_cell, double T_amb,
                                  ChargeWindow window = {}, double L_sei0 = 5e-9);

/// Least-squares (interpolating when six currents are given) quintic per
/// temperature. Every temperature must share the same current grid.
SurrogateModel fit(const std::vector<CalibrationSample>& samples);

/// Terminal L_sei of one constant-current charge with either the full
/// solvent model or a fixed surface concentration.
struct WindowRun {
  double L_end;
  double t_end;
};
WindowRun run_charge_window(const CellParameters& cell, double I_cell, double T_amb,
                            ChargeWindow window, double L_sei0, const double* c_solv_fixed);

/// Default training grid: 3C..8C at 15/25/35 degC.
std::vector<std::pair<double, double>> default_training_grid(double Q_nom);

/// Calibrates every grid point (in parallel up to `jobs`) and fits.
SurrogateModel build_surrogate(const CellParameters& cell,
                               const std::vector<std::pair<double, double>>& grid, int jobs,
                               std::vector<CalibrationSample>* samples_out = nullptr);

}  // namespace bmsopt
