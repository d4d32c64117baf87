#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmsopt/module_model.hpp"

namespace bmsopt {

enum class Scheme { kSCT, kDCT };
enum class VariableLayout { kWithI0, kCellCurrent };

Scheme scheme_from_string(const std::string& s);
std::string to_string(Scheme s);

struct Weights {
  double alpha = 0.5;
  double beta1 = 1.0;  // [1/s]
  double beta2 = 5e8;  // [s/m]
  double beta3 = 5e8;  // [s/m]
};

struct ProblemBounds {
  double I_B_min = -6.0, I_B_max = 0.0;
  double I_0_min = -16.0, I_0_max = -12.0;
  // Used only by the cell-current layout.
  double I_cell_min = -16.0, I_cell_max = -6.0;
  double V_min = 2.5, V_max = 4.2;
  double T_min = 278.15, T_max = 318.15;
  double t_f_max = 2000.0;
};

struct CellInitial {
  double soc = 0.2;
  double L_sei = 5e-9;
  double Q = 2.0;
  double T = 298.15;
};

class InfeasibleProblem : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ChargingProblem {
  Scheme scheme = Scheme::kDCT;
  Weights weights;
  ProblemBounds bounds;
  std::vector<CellInitial> initial;
  double soc_target = 0.8;
  VariableLayout layout = VariableLayout::kWithI0;

  int n_cell() const { return static_cast<int>(initial.size()); }
  int n_tf() const { return scheme == Scheme::kDCT ? n_cell() : 1; }
  void validate() const;
};

nlohmann::json to_json(const ChargingProblem& p);
ChargingProblem problem_from_json(const nlohmann::json& j);

/// N_opt: states plus one control parameter per input trajectory plus the
/// final times.
int decision_variable_count(const ChargingProblem& p, int n_states);

struct CostBreakdown {
  double h = 0.0;   // mean charging time [s]
  double g1 = 0.0;  // mean terminal SEI thickness [m]
  double g2 = 0.0;  // mean SEI growth rate [m/s]
  double J = 0.0;
};

struct TerminalSummary {
  std::vector<double> t_f;        // per cell [s]
  std::vector<double> L_end;      // L_sei(t_f) [m]
  std::vector<double> mean_dLdt;  // average over [0, t_f] [m/s]
};

template <typename S>
struct CostTerms {
  S h, g1, g2, J;
};

/// Composite cost; t_f has one entry per cell (SCT callers pass the shared
/// time for each cell).
template <typename S>
CostTerms<S> cost_terms(const Weights& w, Scheme scheme, std::span<const S> t_f,
                        std::span<const S> L_end, std::span<const S> dLdt) {
  const std::size_t n = L_end.size();
  CostTerms<S> c{S(0.0), S(0.0), S(0.0), S(0.0)};
  for (std::size_t k = 0; k < n; ++k) {
    c.g1 += L_end[k];
    c.g2 += dLdt[k];
  }
  if (scheme == Scheme::kSCT) {
    c.h = t_f[0];
  } else {
    for (std::size_t k = 0; k < n; ++k) c.h += t_f[k];
    c.h *= 1.0 / n;
  }
  c.g1 *= 1.0 / n;
  c.g2 *= 1.0 / n;
  c.J = w.alpha * w.beta1 * c.h + (1.0 - w.alpha) * (w.beta2 * c.g1 + w.beta3 * c.g2);
  return c;
}

CostBreakdown cost(const ChargingProblem& problem, const TerminalSummary& summary);

enum class ConstraintKind {
  kInputBox,
  kVoltagePath,
  kTemperaturePath,
  kStoichiometryBox,
  kInitialCondition,
  kTerminalSoc,
  kFinalTimeBox,
};

std::string to_string(ConstraintKind k);

struct ConstraintDescriptor {
  ConstraintKind kind;
  int cell;              // -1 for module-level quantities
  std::string variable;  // "I_0", "I_B", "V_cell", "T_c", "c_s_n", "t_f", ...
  double lo, hi;
  std::string domain;    // "[0, t_f]", "[0, t_f_k]", "t = 0", "t = t_f_k", "scalar"
  bool equality() const { return lo == hi; }
};

std::vector<ConstraintDescriptor> constraint_set(const ChargingProblem& problem,
                                                 const ModuleParameters& mp);

/// Per-cell currents replace (I_0, I_B); induced boxes follow from
/// I_cell = I_0 - I_B.
ChargingProblem to_cell_current_layout(const ChargingProblem& problem);

/// I_0 = min_k I_cell_k, I_B_k = I_0 - I_cell_k.
ModuleInput reconstruct_input(std::span<const double> I_cell);

/// Rejects targets that cannot be reached under the current boxes within
/// t_f_max (coulomb count at the largest admissible current).
void check_reachable(const ChargingProblem& problem, const ModuleParameters& mp);

}  // namespace bmsopt
