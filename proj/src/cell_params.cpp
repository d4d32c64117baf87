#include "bmsopt/cell_params.hpp"

#include <fstream>
#include <stdexcept>

namespace bmsopt {
namespace {

using nlohmann::json;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid cell parameters: " + what);
}

OcvCurve ocv_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (j.contains("ocv_csv")) {
    std::filesystem::path p = j.at("ocv_csv").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return OcvCurve::from_csv(p);
  }
  const auto& t = j.at("ocv");
  return OcvCurve(t.at("stoichiometry").get<std::vector<double>>(),
                  t.at("volts").get<std::vector<double>>());
}

ElectrodeParams electrode_from_json(const json& j, const std::filesystem::path& base_dir) {
  ElectrodeParams e;
  e.D_s_ref = j.at("D_s_ref");
  e.E_a_Ds = j.at("E_a_Ds");
  e.k_ref = j.at("k_ref");
  e.E_a_k = j.at("E_a_k");
  e.R_s = j.at("R_s");
  e.a_s = j.at("a_s");
  e.L = j.at("L");
  e.c_s_max = j.at("c_s_max");
  e.theta_0 = j.at("theta_0");
  e.theta_100 = j.at("theta_100");
  e.ocv = ocv_from_json(j, base_dir);
  return e;
}

json electrode_to_json(const ElectrodeParams& e) {
  return json{{"D_s_ref", e.D_s_ref},
              {"E_a_Ds", e.E_a_Ds},
              {"k_ref", e.k_ref},
              {"E_a_k", e.E_a_k},
              {"R_s", e.R_s},
              {"a_s", e.a_s},
              {"L", e.L},
              {"c_s_max", e.c_s_max},
              {"theta_0", e.theta_0},
              {"theta_100", e.theta_100},
              {"ocv", {{"stoichiometry", e.ocv.stoichiometry()}, {"volts", e.ocv.volts()}}}};
}

}  // namespace

void CellParameters::validate() const {
  for (int k = 0; k < 2; ++k) {
    const auto& e = electrode[k];
    const std::string tag = k == 0 ? "negative electrode " : "positive electrode ";
    require(e.D_s_ref > 0 && e.k_ref > 0 && e.R_s > 0 && e.a_s > 0 && e.L > 0 && e.c_s_max > 0,
            tag + "constants must be strictly positive");
    require(e.E_a_Ds >= 0 && e.E_a_k >= 0, tag + "activation energies must be non-negative");
    require(e.theta_0 >= 0 && e.theta_0 <= 1 && e.theta_100 >= 0 && e.theta_100 <= 1 &&
                e.theta_0 != e.theta_100,
            tag + "stoichiometry limits must be distinct values in [0, 1]");
    require(!e.ocv.empty() && e.ocv.covers(e.theta_0, e.theta_100),
            tag + "OCV table must cover the [theta_0, theta_100] window");
  }
  require(L_sep > 0, "separator thickness must be positive");
  require(electrolyte.c_e_avg > 0, "electrolyte concentration must be positive");
  for (int i = 0; i < 3; ++i) {
    require(electrolyte.kappa_eff[i] > 0, "effective conductivities must be positive");
    require(electrolyte.eps_e[i] > 0 && electrolyte.eps_e[i] <= 1, "porosities must lie in (0, 1]");
  }
  require(R_l >= 0 && kappa_sei > 0, "resistances/conductivities out of range");
  require(thermal.C_c > 0 && thermal.C_s > 0 && thermal.R_c > 0 && thermal.R_u > 0,
          "thermal constants must be positive");
  require(aging.M_sei > 0 && aging.rho_sei > 0 && aging.k_f > 0 && aging.beta_ct > 0 &&
              aging.c_solv_bulk > 0 && aging.D_solv_ref > 0 && aging.E_a_Dsolv >= 0,
          "aging constants must be positive");
  require(aging.eps_sei > 0 && aging.eps_sei <= 1, "SEI porosity must lie in (0, 1]");
  require(A > 0 && R_cell > 0 && phi_th > 0, "geometry must be positive");
  require(constants.F > 0 && constants.R_g > 0 && constants.T_ref > 0, "constants must be positive");
  require(N_r >= 3 && N_sei >= 3, "need at least three grid points per domain");
  require(Q_nom > 0, "nominal capacity must be positive");
}

CellParameters cell_from_json(const json& j, const std::filesystem::path& base_dir) {
  CellParameters p;
  p.name = j.value("name", std::string("cell"));
  p.electrode[0] = electrode_from_json(j.at("negative"), base_dir);
  p.electrode[1] = electrode_from_json(j.at("positive"), base_dir);
  p.L_sep = j.at("separator").at("L_s");
  const auto& el = j.at("electrolyte");
  p.electrolyte.c_e_avg = el.at("c_e_avg");
  p.electrolyte.kappa_eff = el.at("kappa_eff").get<std::array<double, 3>>();
  p.electrolyte.eps_e = el.at("eps_e").get<std::array<double, 3>>();
  p.R_l = j.at("resistances").at("R_l");
  p.kappa_sei = j.at("resistances").at("kappa_sei");
  const auto& th = j.at("thermal");
  p.thermal = {th.at("C_c"), th.at("C_s"), th.at("R_c"), th.at("R_u")};
  const auto& ag = j.at("aging");
  p.aging.M_sei = ag.at("M_sei");
  p.aging.rho_sei = ag.at("rho_sei");
  p.aging.k_f = ag.at("k_f");
  p.aging.beta_ct = ag.at("beta_ct");
  p.aging.U_s = ag.at("U_s");
  p.aging.eps_sei = ag.at("eps_sei");
  p.aging.c_solv_bulk = ag.at("c_solv_bulk");
  p.aging.D_solv_ref = ag.at("D_solv_ref");
  p.aging.E_a_Dsolv = ag.at("E_a_Dsolv");
  const auto& g = j.at("geometry");
  p.A = g.at("A");
  p.R_cell = g.at("R_cell");
  p.phi_th = g.at("phi_th");
  if (j.contains("constants")) {
    const auto& c = j.at("constants");
    p.constants.F = c.value("F", p.constants.F);
    p.constants.R_g = c.value("R_g", p.constants.R_g);
    p.constants.T_ref = c.value("T_ref", p.constants.T_ref);
  }
  if (j.contains("discretization")) {
    p.N_r = j.at("discretization").value("N_r", p.N_r);
    p.N_sei = j.at("discretization").value("N_sei", p.N_sei);
  }
  p.Q_nom = j.at("capacity").at("Q_nom");
  p.validate();
  return p;
}

json cell_to_json(const CellParameters& p) {
  return json{
      {"name", p.name},
      {"negative", electrode_to_json(p.neg())},
      {"positive", electrode_to_json(p.pos())},
      {"separator", {{"L_s", p.L_sep}}},
      {"electrolyte",
       {{"c_e_avg", p.electrolyte.c_e_avg},
        {"kappa_eff", p.electrolyte.kappa_eff},
        {"eps_e", p.electrolyte.eps_e}}},
      {"resistances", {{"R_l", p.R_l}, {"kappa_sei", p.kappa_sei}}},
      {"thermal",
       {{"C_c", p.thermal.C_c}, {"C_s", p.thermal.C_s}, {"R_c", p.thermal.R_c}, {"R_u", p.thermal.R_u}}},
      {"aging",
       {{"M_sei", p.aging.M_sei},
        {"rho_sei", p.aging.rho_sei},
        {"k_f", p.aging.k_f},
        {"beta_ct", p.aging.beta_ct},
        {"U_s", p.aging.U_s},
        {"eps_sei", p.aging.eps_sei},
        {"c_solv_bulk", p.aging.c_solv_bulk},
        {"D_solv_ref", p.aging.D_solv_ref},
        {"E_a_Dsolv", p.aging.E_a_Dsolv}}},
      {"geometry", {{"A", p.A}, {"R_cell", p.R_cell}, {"phi_th", p.phi_th}}},
      {"constants", {{"F", p.constants.F}, {"R_g", p.constants.R_g}, {"T_ref", p.constants.T_ref}}},
      {"discretization", {{"N_r", p.N_r}, {"N_sei", p.N_sei}}},
      {"capacity", {{"Q_nom", p.Q_nom}}},
  };
}

CellParameters load_cell(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open cell parameter file " + json_path.string());
  json j = json::parse(in);
  // A module file holds a list of cells; a cell file holds one object.
  if (j.contains("cells")) j = j.at("cells").at(0);
  return cell_from_json(j, json_path.parent_path());
}

}  // namespace bmsopt
