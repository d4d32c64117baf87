#pragma once

// Single-cell electrochemical, thermal and SEI-aging dynamics. Every
// function is a template over the scalar type so the same code serves the
// simulator (double) and the transcription (forward-mode dual numbers).

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmsopt/ad.hpp"
#include "bmsopt/cell_params.hpp"

namespace bmsopt {

/// Per-cell state in physical units. Concentration vectors hold the N_r - 1
/// non-centre radial nodes, surface node last.
struct CellState {
  std::vector<double> c_s_n;
  std::vector<double> c_s_p;
  double T_c = 298.15;
  double T_s = 298.15;
  double L_sei = 5e-9;
  double Q = 2.0;  // [Ah]
  std::vector<double> c_solv;  // high-fidelity mode only, surface node first

  /// Uniform (rested) concentrations consistent with `soc`.
  static CellState at_rest(const CellParameters& p, double soc, double T, double L_sei, double Q,
                           bool with_solvent);
};

template <typename S>
S arrhenius(const S& phi_ref, double E_a, const S& T_c, double T_ref, double R_g) {
  using std::exp;
  if (!(value_of(T_c) > 0.0) || !(T_ref > 0.0)) {
    throw std::domain_error("arrhenius: temperatures must be positive");
  }
  return phi_ref * exp((E_a / R_g) * (1.0 / T_ref - 1.0 / T_c));
}

template <typename S>
S solid_diffusivity(const CellParameters& p, Electrode e, const S& T_c) {
  const auto& el = p.of(e);
  return arrhenius(S(el.D_s_ref), el.E_a_Ds, T_c, p.constants.T_ref, p.constants.R_g);
}

template <typename S>
S solvent_diffusivity(const CellParameters& p, const S& T_c) {
  return arrhenius(S(p.aging.D_solv_ref), p.aging.E_a_Dsolv, T_c, p.constants.T_ref,
                   p.constants.R_g);
}

template <typename S>
S exchange_current_density(const CellParameters& p, Electrode e, const S& c_surf, const S& T_c) {
  using std::sqrt;
  const auto& el = p.of(e);
  const double c = value_of(c_surf);
  if (!(c > 0.0 && c < el.c_s_max)) {
    throw std::domain_error("exchange current density: surface concentration " +
                            std::to_string(c) + " outside (0, c_s_max)");
  }
  const S k = arrhenius(S(el.k_ref), el.E_a_k, T_c, p.constants.T_ref, p.constants.R_g);
  return k * p.constants.F * sqrt(p.electrolyte.c_e_avg * c_surf * (el.c_s_max - c_surf));
}

/// Butler–Volmer surface overpotential with symmetric transfer coefficients.
template <typename S>
S overpotential(const CellParameters& p, Electrode e, const S& c_surf, const S& T_c,
                const S& I_cell) {
  using std::asinh;
  const auto& el = p.of(e);
  const S i0 = exchange_current_density(p, e, c_surf, T_c);
  return (p.constants.R_g * T_c / (0.5 * p.constants.F)) *
         asinh(I_cell / (2.0 * p.A * el.a_s * el.L * i0));
}

template <typename S>
S sei_resistance(const CellParameters& p, const S& L_sei) {
  return L_sei / (p.neg().a_s * p.A * p.neg().L * p.kappa_sei);
}

inline double electrolyte_resistance(const CellParameters& p) {
  const auto& k = p.electrolyte.kappa_eff;
  if (!(k[0] > 0 && k[1] > 0 && k[2] > 0)) {
    throw std::domain_error("electrolyte resistance: conductivities must be positive");
  }
  return (p.neg().L / k[0] + 2.0 * p.L_sep / k[1] + p.pos().L / k[2]) / (2.0 * p.A);
}

template <typename S>
S open_circuit_voltage(const CellParameters& p, const S& c_n_surf, const S& c_p_surf) {
  return p.pos().ocv(c_p_surf / p.pos().c_s_max) - p.neg().ocv(c_n_surf / p.neg().c_s_max);
}

template <typename S>
S cell_voltage(const CellParameters& p, const S& c_n_surf, const S& c_p_surf, const S& T_c,
               const S& L_sei, const S& I_cell) {
  const S eta_p = overpotential(p, Electrode::kPos, c_p_surf, T_c, I_cell);
  const S eta_n = overpotential(p, Electrode::kNeg, c_n_surf, T_c, I_cell);
  return open_circuit_voltage(p, c_n_surf, c_p_surf) + eta_p - eta_n -
         I_cell * (p.R_l + electrolyte_resistance(p) + sei_resistance(p, L_sei));
}

/// Volume weights of the radial nodes r_i = i * dr, i = 1..M. Interior
/// nodes carry i^2 and the surface node M(M-1)/2; with these weights the
/// discrete diffusion operator conserves the weighted mean exactly.
std::vector<double> bulk_weights(int n_conc);

template <typename S>
S bulk_concentration(std::span<const double> weights, std::span<const S> c) {
  S acc(0.0);
  for (std::size_t i = 0; i < c.size(); ++i) acc += weights[i] * c[i];
  return acc;
}

template <typename S>
S soc_bulk(const CellParameters& p, Electrode e, std::span<const double> weights,
           std::span<const S> c) {
  if (c.size() != weights.size()) throw std::invalid_argument("soc_bulk: size mismatch");
  const auto& el = p.of(e);
  return (bulk_concentration(weights, c) / el.c_s_max - el.theta_0) / (el.theta_100 - el.theta_0);
}

/// FDM solid diffusion: alpha * A c + beta * B (I_cell - g).
template <typename S>
void solid_diffusion_rhs(const CellParameters& p, Electrode e, std::span<const S> c, const S& T_c,
                         const S& I_cell, const S& g, std::span<S> out) {
  const int M = static_cast<int>(c.size());
  if (M != p.n_conc() || out.size() != c.size()) {
    throw std::invalid_argument("solid_diffusion_rhs: expected " + std::to_string(p.n_conc()) +
                                " radial nodes");
  }
  const auto& el = p.of(e);
  const double dr = el.R_s / (p.N_r - 1);
  const S alpha = solid_diffusivity(p, e, T_c) / (dr * dr);
  const double sign = e == Electrode::kNeg ? -1.0 : 1.0;
  const double beta = sign / (p.A * el.L * p.constants.F * el.a_s * dr);
  for (int i = 1; i < M; ++i) {
    const double ri = i;
    S lap = ((ri + 1.0) / ri) * c[i] - 2.0 * c[i - 1];
    if (i > 1) lap += ((ri - 1.0) / ri) * c[i - 2];
    out[i - 1] = alpha * lap;
  }
  const double b_surf = 2.0 + 2.0 / (p.N_r - 1);
  out[M - 1] = alpha * (2.0 * c[M - 2] - 2.0 * c[M - 1]) + (beta * b_surf) * (I_cell - g);
}

/// Side-reaction current density [A/m^2 of interface]; never positive.
template <typename S>
S side_reaction_current(const CellParameters& p, const S& c_n_surf, const S& T_c, const S& I_cell,
                        const S& L_sei, const S& c_solv_surf) {
  using std::exp;
  const auto& c = p.constants;
  const S phi_sn = p.neg().ocv(c_n_surf / p.neg().c_s_max) +
                   overpotential(p, Electrode::kNeg, c_n_surf, T_c, I_cell);
  const S drive = phi_sn - sei_resistance(p, L_sei) * I_cell - p.aging.U_s;
  return -2.0 * c.F * p.aging.k_f * (c_n_surf * c_n_surf) * c_solv_surf *
         exp((-p.aging.beta_ct * c.F / c.R_g) * drive / T_c);
}

template <typename S>
struct AgingRates {
  S dL_dt;   // [m/s]
  S dQ_dt;   // [A], i.e. coulombs per second
};

inline double sei_growth_factor(const CellParameters& p) {
  const auto& n = p.neg();
  return -p.aging.M_sei / (2.0 * p.constants.F * p.aging.rho_sei * n.a_s * n.L * p.A);
}

/// Lumped side-reaction current g_sn = a_sn L_n A i_s [A].
template <typename S>
S side_reaction_sink(const CellParameters& p, const S& i_s) {
  return p.neg().a_s * p.neg().L * p.A * i_s;
}

template <typename S>
AgingRates<S> aging_rhs(const CellParameters& p, const S& i_s) {
  const S g = side_reaction_sink(p, i_s);
  return {sei_growth_factor(p) * g, g};
}

template <typename S>
struct ThermalRates {
  S dT_c;
  S dT_s;
};

template <typename S>
ThermalRates<S> thermal_rhs(const CellParameters& p, const S& T_c, const S& T_s, const S& T_amb,
                            const S& I_cell, const S& V_cell, const S& V_oc) {
  const auto& th = p.thermal;
  const S q_cs = (T_s - T_c) / th.R_c;
  return {(I_cell * (V_oc - V_cell) + q_cs) / th.C_c, ((T_amb - T_s) / th.R_u - q_cs) / th.C_s};
}

/// Solvent diffusion across the SEI layer on a grid that stretches with
/// L_sei. Node 0 is the particle surface; the outer node is pinned.
template <typename S>
void solvent_diffusion_rhs(const CellParameters& p, std::span<const S> c, const S& L_sei,
                           const S& dL_dt, const S& i_s, const S& T_c, std::span<S> out) {
  const int N = static_cast<int>(c.size());
  if (N != p.N_sei || out.size() != c.size()) {
    throw std::invalid_argument("solvent_diffusion_rhs: expected " + std::to_string(p.N_sei) +
                                " SEI nodes");
  }
  if (!(value_of(L_sei) > 0.0)) throw std::domain_error("solvent_diffusion_rhs: L_sei <= 0");
  const double dxi = 1.0 / (N - 1);
  const S D = solvent_diffusivity(p, T_c);
  const S L_dxi = L_sei * dxi;
  const S alpha = D / (L_dxi * L_dxi);
  const S beta = 2.0 / L_dxi + dL_dt / D;
  out[0] = 2.0 * alpha * (c[1] - c[0]) + beta * (i_s / p.constants.F - dL_dt * c[0]);
  for (int i = 1; i < N - 1; ++i) {
    const double xi = i * dxi;
    const S gamma = ((xi - 1.0) / 2.0) * dL_dt / L_dxi;
    out[i] = alpha * (c[i + 1] - 2.0 * c[i] + c[i - 1]) + gamma * (c[i + 1] - c[i - 1]);
  }
  out[N - 1] = S(0.0);
}

struct TimeScales {
  double thermal;
  double electrochemical;
  double aging;
};

inline TimeScales characteristic_timescales(const CellParameters& p) {
  const double Rn = p.neg().R_s;
  return {p.R_cell * p.R_cell / p.phi_th, Rn * Rn / p.neg().D_s_ref, Rn * Rn / p.aging.D_solv_ref};
}

/// Everything the module needs from one cell at one instant.
template <typename S>
struct CellRates {
  std::vector<S> dc_n;
  std::vector<S> dc_p;
  S dT_c;
  S dT_s;  // without cell-to-cell coupling
  S dL_sei;
  S dQ;  // [Ah/s]
  S V_cell;
  S V_oc;
  S i_s;
};

/// Evaluates the electrochemical, thermal and aging rates of one cell given
/// the surface solvent concentration (from the PDE or the surrogate).
template <typename S>
CellRates<S> cell_rates(const CellParameters& p, std::span<const S> c_n, std::span<const S> c_p,
                        const S& T_c, const S& T_s, const S& L_sei, const S& I_cell,
                        const S& T_amb, const S& c_solv_surf) {
  CellRates<S> r;
  const S& cn_surf = c_n.back();
  const S& cp_surf = c_p.back();
  r.i_s = side_reaction_current(p, cn_surf, T_c, I_cell, L_sei, c_solv_surf);
  const S g = side_reaction_sink(p, r.i_s);
  r.dc_n.resize(c_n.size());
  r.dc_p.resize(c_p.size());
  solid_diffusion_rhs<S>(p, Electrode::kNeg, c_n, T_c, I_cell, g, r.dc_n);
  solid_diffusion_rhs<S>(p, Electrode::kPos, c_p, T_c, I_cell, S(0.0), r.dc_p);
  r.V_oc = open_circuit_voltage(p, cn_surf, cp_surf);
  r.V_cell = cell_voltage(p, cn_surf, cp_surf, T_c, L_sei, I_cell);
  const auto th = thermal_rhs(p, T_c, T_s, T_amb, I_cell, r.V_cell, r.V_oc);
  r.dT_c = th.dT_c;
  r.dT_s = th.dT_s;
  const auto ag = aging_rhs(p, r.i_s);
  r.dL_sei = ag.dL_dt;
  r.dQ = ag.dQ_dt / 3600.0;
  return r;
}

}  // namespace bmsopt
