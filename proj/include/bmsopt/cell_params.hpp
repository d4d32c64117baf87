#pragma once

#include <array>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "bmsopt/ocv_curve.hpp"

namespace bmsopt {

enum class Electrode { kNeg = 0, kPos = 1 };

inline constexpr int index_of(Electrode e) { return static_cast<int>(e); }

struct ElectrodeParams {
  double D_s_ref = 0.0;   // solid diffusivity at T_ref [m^2/s]
  double E_a_Ds = 0.0;    // [J/mol]
  double k_ref = 0.0;     // reaction rate constant [m^2.5/(s mol^0.5)]
  double E_a_k = 0.0;     // [J/mol]
  double R_s = 0.0;       // particle radius [m]
  double a_s = 0.0;       // specific interfacial area [1/m]
  double L = 0.0;         // electrode thickness [m]
  double c_s_max = 0.0;   // [mol/m^3]
  double theta_0 = 0.0;   // stoichiometry at 0 % SOC
  double theta_100 = 0.0; // stoichiometry at 100 % SOC
  OcvCurve ocv;

  double theta_min() const { return std::min(theta_0, theta_100); }
  double theta_max() const { return std::max(theta_0, theta_100); }
  double theta_at_soc(double soc) const { return theta_0 + soc * (theta_100 - theta_0); }
};

struct ElectrolyteParams {
  double c_e_avg = 1000.0;                 // [mol/m^3]
  std::array<double, 3> kappa_eff{};       // negative, separator, positive [S/m]
  std::array<double, 3> eps_e{};           // porosities
};

struct ThermalParams {
  double C_c = 0.0;  // core heat capacity [J/K]
  double C_s = 0.0;  // surface heat capacity [J/K]
  double R_c = 0.0;  // core-surface conduction [K/W]
  double R_u = 0.0;  // surface-ambient convection [K/W]
};

struct AgingParams {
  double M_sei = 0.0;        // [kg/mol]
  double rho_sei = 0.0;      // [kg/m^3]
  double k_f = 0.0;          // solvent reduction rate constant
  double beta_ct = 0.5;      // side-reaction charge-transfer coefficient
  double U_s = 0.0;          // solvent reduction potential [V]
  double eps_sei = 0.0;      // SEI porosity
  double c_solv_bulk = 0.0;  // [mol/m^3]
  double D_solv_ref = 0.0;   // [m^2/s]
  double E_a_Dsolv = 0.0;    // [J/mol]
};

struct PhysicalConstants {
  double F = 96485.33212;  // [C/mol]
  double R_g = 8.314462618;
  double T_ref = 298.0;  // [K]
};

/// Every constant needed to evaluate one cell. Treated as an immutable value.
struct CellParameters {
  std::string name;
  std::array<ElectrodeParams, 2> electrode;
  double L_sep = 0.0;
  ElectrolyteParams electrolyte;
  double R_l = 0.0;        // lumped contact resistance [ohm]
  double kappa_sei = 0.0;  // SEI ionic conductivity [S/m]
  ThermalParams thermal;
  AgingParams aging;
  double A = 0.0;       // electrode cross-section [m^2]
  double R_cell = 0.0;  // can radius [m]
  double phi_th = 0.0;  // thermal diffusivity [m^2/s]
  PhysicalConstants constants;
  int N_r = 10;    // radial grid points per electrode, centre included
  int N_sei = 10;  // SEI-layer grid points
  double Q_nom = 2.0;  // [Ah]

  const ElectrodeParams& neg() const { return electrode[0]; }
  const ElectrodeParams& pos() const { return electrode[1]; }
  const ElectrodeParams& of(Electrode e) const { return electrode[index_of(e)]; }

  /// Number of solid-concentration states per electrode. The centre node
  /// decouples from the rest of the grid and is not carried.
  int n_conc() const { return N_r - 1; }

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

/// Parses one cell object. OCV table paths are resolved against `base_dir`.
CellParameters cell_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json cell_to_json(const CellParameters& p);

/// The representative NMC/graphite 2 Ah 18650 cell shipped in data/.
CellParameters load_cell(const std::filesystem::path& json_path);

}  // namespace bmsopt
