#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "bmsopt/bspline.hpp"
#include "bmsopt/module_model.hpp"
#include "bmsopt/nlp.hpp"
#include "bmsopt/ocp.hpp"

namespace bmsopt {

struct VariableClass {
  int order;
  int smoothness;
};

struct Discretization {
  int n_segments = 20;        // N_P = N_BP - 1
  VariableClass states{3, 1};
  VariableClass inputs{2, 1};
  int q = 2;                  // Gauss points per segment
};

/// Shared normalized grid split into phases; phase p ends when the p-th cell
/// (in finishing order) reaches the target, after which that cell carries no
/// current. SCT uses a single phase.
struct PhasePlan {
  std::vector<int> order;      // cell index finishing p-th
  std::vector<int> rank;       // phase in which each cell finishes
  std::vector<int> seg_begin;  // first segment of each phase
  std::vector<int> seg_end;    // one past the last segment

  int n_phase() const { return static_cast<int>(seg_begin.size()); }
  double tau_begin(int p, int n_seg) const { return static_cast<double>(seg_begin[p]) / n_seg; }
  double tau_end(int p, int n_seg) const { return static_cast<double>(seg_end[p]) / n_seg; }
};

class Transcription {
 public:
  Transcription(const ChargingProblem& problem, const ModuleParameters& mp, const Discretization& disc);
  Transcription(const Transcription&) = delete;
  Transcription& operator=(const Transcription&) = delete;

  ChargingProblem problem;
  ModuleParameters mp;
  Discretization disc;
  StateLayout layout;
  StateScaling scaling;
  SplineBasis x_basis, u_basis;
  std::vector<double> cps;  // collocation points in tau
  PhasePlan plan;
  double I_scale = 2.0;     // currents in C-rate units
  static constexpr double kTimeScale = 1000.0;  // final times in ks

  NlpProblem nlp;

  int n_states() const { return layout.size(); }
  int n_inputs() const;  // input trajectories
  int x_offset() const { return n_tf_; }
  int u_offset() const { return n_tf_ + n_states() * x_basis.n_fp(); }
  int state_var(int state, int j) const { return x_offset() + state * x_basis.n_fp() + j; }
  int input_var(int input, int j) const { return u_offset() + input * u_basis.n_fp() + j; }

  // Row blocks.
  int defect_row(int state, int cp) const { return state * static_cast<int>(cps.size()) + cp; }
  int ic_row(int state) const { return n_states() * static_cast<int>(cps.size()) + state; }
  int terminal_row(int k) const { return ic_row(n_states()) + k; }
  int voltage_row(int k, int cp) const { return terminal_row(layout.n_cell) + k * static_cast<int>(cps.size()) + cp; }

  /// Decoding of a decision vector.
  std::vector<double> final_times(const std::vector<double>& P) const;  // per cell [s]
  double horizon(const std::vector<double>& P) const;
  double time_at(const std::vector<double>& P, double tau) const;
  double tau_at(const std::vector<double>& P, double t) const;
  std::vector<double> state_at(const std::vector<double>& P, double tau) const;  // physical
  double soc_at(const std::vector<double>& P, int k, double tau) const;
  /// Module input at physical time t, with finished cells bypassed.
  ModuleInput input_at(const std::vector<double>& P, double t) const;
  InputProfile input_profile(const std::vector<double>& P) const;
  /// Cell currents with no bypass, each held past its final time; meant for
  /// replay under an SOC cutoff.
  InputProfile replay_profile(const std::vector<double>& P) const;
  TerminalSummary terminal(const std::vector<double>& P) const;
  CostBreakdown cost(const std::vector<double>& P) const;
  int phase_of_tau(double tau) const;
  /// tau at which cell k reaches its final time.
  double tau_final(int k) const;

  /// Text dump of dimensions, sparsity, bounds and the scaled initial guess.
  void dump(std::ostream& os) const;

 private:
  struct Local {
    std::vector<std::pair<int, double>> terms;  // decision index, weight
  };
  struct Element {
    int cell, cp, phase;
    bool active;
    double dtau;  // tau length of the phase
    int n_local;
    int nb_slot[2];
    int input_slot[2];
    int time_slot;
    std::vector<Local> locals;
  };

  void build_elements();
  void build_linear_rows();
  void build_nlp();
  std::vector<double> initial_guess() const;

  template <typename S>
  void element_outputs(const Element& e, const S* u, S* out) const;

  double local_value(const Local& l, const std::vector<double>& P) const;

  void eval_constraints(const std::vector<double>& P, std::vector<double>& c) const;
  void eval_jacobian(const std::vector<double>& P, Triplets& t) const;
  void eval_hessian(const std::vector<double>& P, double sigma, const std::vector<double>& lambda,
                    Triplets& t) const;
  double eval_objective(const std::vector<double>& P) const;
  void eval_gradient(const std::vector<double>& P, std::vector<double>& g) const;
  void objective_hessian(const std::vector<double>& P, double sigma, Triplets& t) const;

  int cell_state(int k, int i) const;  // cell-local state i -> module layout index
  int n_cell_states() const { return 2 * layout.n_conc + 4; }
  int tf_var_of_phase(int p) const { return problem.scheme == Scheme::kDCT ? p : 0; }
  // Cost locals: final-time variables then L_sei(t_f_k) per cell.
  std::vector<Local> cost_locals() const;

  int n_tf_ = 0;
  int n_con_ = 0;
  std::vector<Element> elements_;
  std::vector<double> soc_weights_;
  Triplets linear_rows_;
};

std::unique_ptr<Transcription> transcribe(const ChargingProblem& problem, const ModuleParameters& mp,
                                          const Discretization& disc = {});

}  // namespace bmsopt
