#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmsopt/cell_model.hpp"
#include "bmsopt/cell_params.hpp"
#include "bmsopt/surrogate.hpp"

namespace bmsopt {

enum class Fidelity { kHighFidelity, kSurrogate };

Fidelity fidelity_from_string(const std::string& s);
std::string to_string(Fidelity f);

/// Where the reduced model takes its surface solvent concentration from.
struct SolventClosure {
  std::vector<SurrogateModel> models;  // one per cell, or a single shared model
  std::vector<double> fixed;           // constant override per cell (calibration)

  template <typename S>
  S surface(int k, const S& I_cell, double T_amb) const {
    if (!fixed.empty()) return S(fixed[std::min<std::size_t>(k, fixed.size() - 1)]);
    if (models.empty()) throw std::logic_error("surrogate mode needs a fitted surrogate model");
    return models[std::min<std::size_t>(k, models.size() - 1)].evaluate(I_cell, T_amb);
  }
};

struct ModuleParameters {
  std::vector<CellParameters> cells;
  double R_m = 5.0;        // cell-to-cell surface resistance [K/W]
  double T_amb = 298.15;   // [K]
  SolventClosure solvent;

  int n_cell() const { return static_cast<int>(cells.size()); }
  void validate() const;
};

/// Reads {"cells": [...], "R_m": ..., "T_amb": ...}.
ModuleParameters load_module(const std::filesystem::path& path);

/// Offsets into the flat module state:
/// [c_n (all cells), c_p (all cells), (T_c, T_s) per cell, L_sei, Q, c_solv].
struct StateLayout {
  int n_cell = 0;
  int n_conc = 0;
  int n_sei = 0;
  Fidelity mode = Fidelity::kSurrogate;

  StateLayout() = default;
  StateLayout(const ModuleParameters& mp, Fidelity mode);

  int c_n(int k) const { return k * n_conc; }
  int c_p(int k) const { return (n_cell + k) * n_conc; }
  int T_c(int k) const { return 2 * n_cell * n_conc + 2 * k; }
  int T_s(int k) const { return T_c(k) + 1; }
  int L_sei(int k) const { return 2 * n_cell * n_conc + 2 * n_cell + k; }
  int Q(int k) const { return L_sei(k) + n_cell; }
  int c_solv(int k) const { return 2 * n_cell * n_conc + 4 * n_cell + k * n_sei; }
  int size() const {
    return n_cell * (4 + 2 * n_conc) + (mode == Fidelity::kHighFidelity ? n_cell * n_sei : 0);
  }
};

struct ModuleState {
  StateLayout layout;
  std::vector<double> x;

  static ModuleState from_cells(const ModuleParameters& mp, const std::vector<CellState>& cells,
                                Fidelity mode);
  CellState cell(int k) const;
};

struct ModuleInput {
  double I_0 = 0.0;
  std::vector<double> I_B;

  double I_cell(int k) const { return I_0 - I_B.at(k); }
};

/// Per-cell algebraic outputs computed alongside the rates.
struct CellOutputs {
  double V_cell = 0.0;
  double V_oc = 0.0;
  double soc = 0.0;
  double i_s = 0.0;
};

class CellError : public std::runtime_error {
 public:
  CellError(int cell, double t, const std::string& what)
      : std::runtime_error("cell " + std::to_string(cell + 1) +
                           (t >= 0 ? " at t=" + std::to_string(t) + " s" : std::string()) +
                           ": " + what),
        cell_(cell),
        t_(t),
        detail_(what) {}
  int cell() const { return cell_; }
  double time() const { return t_; }
  const std::string& detail() const { return detail_; }

 private:
  int cell_;
  double t_;
  std::string detail_;
};

/// Rates of the whole module for per-cell currents. Generic over the scalar
/// so the transcription can differentiate it.
template <typename S>
void module_rhs(const ModuleParameters& mp, const StateLayout& lay, std::span<const S> x,
                std::span<const S> I_cell, std::span<S> dx, std::vector<S>* V_cell = nullptr) {
  if (static_cast<int>(x.size()) != lay.size() || dx.size() != x.size() ||
      static_cast<int>(I_cell.size()) != lay.n_cell) {
    throw std::invalid_argument("module_rhs: dimension mismatch");
  }
  const int N = lay.n_cell;
  const int M = lay.n_conc;
  const S T_amb(mp.T_amb);
  if (V_cell) V_cell->assign(N, S(0.0));
  for (int k = 0; k < N; ++k) {
    const auto& p = mp.cells[k];
    const auto c_n = x.subspan(lay.c_n(k), M);
    const auto c_p = x.subspan(lay.c_p(k), M);
    const S& T_c = x[lay.T_c(k)];
    const S& T_s = x[lay.T_s(k)];
    const S& L = x[lay.L_sei(k)];
    try {
      S c_solv_surf = lay.mode == Fidelity::kHighFidelity
                          ? x[lay.c_solv(k)]
                          : mp.solvent.surface(k, I_cell[k], mp.T_amb);
      auto r = cell_rates<S>(p, c_n, c_p, T_c, T_s, L, I_cell[k], T_amb, c_solv_surf);
      for (int i = 0; i < M; ++i) {
        dx[lay.c_n(k) + i] = r.dc_n[i];
        dx[lay.c_p(k) + i] = r.dc_p[i];
      }
      S dT_s = r.dT_s;
      // Nearest-neighbour chain: heat flows toward the cooler surface.
      const double gain = 1.0 / (mp.R_m * p.thermal.C_s);
      if (k > 0) dT_s += gain * (x[lay.T_s(k - 1)] - T_s);
      if (k + 1 < N) dT_s += gain * (x[lay.T_s(k + 1)] - T_s);
      dx[lay.T_c(k)] = r.dT_c;
      dx[lay.T_s(k)] = dT_s;
      dx[lay.L_sei(k)] = r.dL_sei;
      dx[lay.Q(k)] = r.dQ;
      if (lay.mode == Fidelity::kHighFidelity) {
        solvent_diffusion_rhs<S>(p, x.subspan(lay.c_solv(k), lay.n_sei), L, r.dL_sei, r.i_s, T_c,
                                 dx.subspan(lay.c_solv(k), lay.n_sei));
      }
      if (V_cell) (*V_cell)[k] = r.V_cell;
    } catch (const CellError&) {
      throw;
    } catch (const std::exception& e) {
      throw CellError(k, -1.0, e.what());
    }
  }
}

/// Convenience overload on value types.
std::vector<double> module_rhs(const ModuleParameters& mp, const ModuleState& state,
                               const ModuleInput& input);

CellOutputs cell_outputs(const ModuleParameters& mp, const StateLayout& lay,
                         std::span<const double> x, int k, double I_cell);

/// Affine map between physical states and O(1) integration/optimization
/// coordinates: x = offset + scale * z.
struct StateScaling {
  std::vector<double> offset;
  std::vector<double> scale;
  StateScaling() = default;
  StateScaling(const ModuleParameters& mp, const StateLayout& lay);
};

using InputProfile = std::function<ModuleInput(double t)>;

struct SimulationOptions {
  double horizon = 3600.0;   // [s]
  double sample_dt = 1.0;    // output sampling [s]; <= 0 keeps accepted steps only
  double abs_tol = 1e-8;     // on scaled states
  double rel_tol = 1e-8;
  double max_step = 20.0;    // [s]
  // Per-cell bypass: once a cell's SOC reaches this value its current is
  // diverted (I_B = I_0) for the rest of the run.
  std::optional<double> soc_cutoff;
  bool stop_when_all_done = true;
  // Bounds used for the event log (and the cycling feasibility check).
  double V_min = 2.5, V_max = 4.2;
  double T_min = 278.15, T_max = 318.15;
};

struct BoundEvent {
  double t;
  int cell;
  std::string kind;  // "V_max", "T_max", "theta_n", ...
  double value;
};

struct TrajectorySample {
  double t;
  double I_0;
  std::vector<double> I_B, I_cell, V, soc, T_c, T_s, L_sei, Q;
};

struct Trajectory {
  StateLayout layout;
  std::vector<TrajectorySample> samples;
  std::vector<std::vector<double>> states;  // physical state at each sample
  std::vector<BoundEvent> events;
  std::vector<double> done_time;  // per cell; negative if never reached the cutoff
  double t_end = 0.0;
  int steps = 0;

  const std::vector<double>& final_state() const { return states.back(); }
  void write_csv(const std::filesystem::path& path) const;
};

Trajectory simulate(const ModuleParameters& mp, const ModuleState& initial,
                    const InputProfile& input, const SimulationOptions& opt);

/// Charging protocol for `cycle`: returns the module input at time t of a
/// charge (before bypass is applied).
struct CycleProtocol {
  std::string name;
  InputProfile input;
};

CycleProtocol constant_current_protocol(double c_rate, double Q_nom, int n_cell);

struct RestPolicy {
  double rest_s = 0.0;  // zero-current rest after each charge (aging continues)
};

struct CycleRecord {
  int cycle;
  double charge_time;  // time until every cell reached the target [s]
  std::vector<double> Q, L_sei, loss_pct;
};

struct CycleSettings {
  std::vector<double> soc_init;
  double soc_target = 0.8;
  std::vector<double> L_sei0;
  std::vector<double> Q0;
  Fidelity mode = Fidelity::kSurrogate;
  double max_charge_time = 4 * 3600.0;
  bool enforce_bounds = true;
};

/// Repeated charges from the per-cell initial SOC to the target; aging states
/// persist across cycles while concentrations and temperatures are reset.
std::vector<CycleRecord> cycle(const ModuleParameters& mp, const CycleProtocol& protocol,
                               int n_cycles, const CycleSettings& settings,
                               const RestPolicy& rest = {});

void write_cycles_csv(const std::vector<CycleRecord>& records, const std::filesystem::path& path);

}  // namespace bmsopt
