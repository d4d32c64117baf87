#include "bmsopt/ocp.hpp"

#include <algorithm>
#include <cmath>

namespace bmsopt {

Scheme scheme_from_string(const std::string& s) {
  if (s == "sct" || s == "SCT") return Scheme::kSCT;
  if (s == "dct" || s == "DCT") return Scheme::kDCT;
  throw std::invalid_argument("unknown scheme '" + s + "' (expected sct or dct)");
}

std::string to_string(Scheme s) { return s == Scheme::kSCT ? "SCT" : "DCT"; }

void ChargingProblem::validate() const {
  if (initial.empty()) throw std::invalid_argument("problem needs at least one cell");
  if (!(weights.alpha >= 0 && weights.alpha <= 1)) throw std::invalid_argument("alpha must lie in [0,1]");
  if (!(weights.beta1 > 0 && weights.beta2 > 0 && weights.beta3 > 0)) {
    throw std::invalid_argument("beta weights must be positive");
  }
  const auto& b = bounds;
  if (!(b.I_B_min < b.I_B_max && b.I_0_min < b.I_0_max && b.I_cell_min < b.I_cell_max &&
        b.V_min < b.V_max && b.T_min < b.T_max && b.t_f_max > 0)) {
    throw std::invalid_argument("empty bound interval in the problem definition");
  }
  if (!(soc_target <= 1.0)) throw std::invalid_argument("SOC target must not exceed 1");
  for (const auto& c : initial) {
    if (!(c.soc >= 0 && c.soc < soc_target)) {
      throw std::invalid_argument("initial SOC must lie in [0, SOC_target)");
    }
    if (!(c.L_sei > 0 && c.Q > 0)) throw std::invalid_argument("initial L_sei and Q must be positive");
    if (!(c.T >= b.T_min && c.T <= b.T_max)) {
      throw std::invalid_argument("initial temperature outside the temperature bounds");
    }
  }
}

nlohmann::json to_json(const ChargingProblem& p) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : p.initial) {
    cells.push_back({{"soc", c.soc}, {"L_sei", c.L_sei}, {"Q", c.Q}, {"T", c.T}});
  }
  const auto& b = p.bounds;
  return {{"scheme", p.scheme == Scheme::kSCT ? "sct" : "dct"},
          {"layout", p.layout == VariableLayout::kWithI0 ? "with-I0" : "cell-current"},
          {"weights",
           {{"alpha", p.weights.alpha}, {"beta1", p.weights.beta1}, {"beta2", p.weights.beta2},
            {"beta3", p.weights.beta3}}},
          {"bounds",
           {{"I_B", {b.I_B_min, b.I_B_max}},
            {"I_0", {b.I_0_min, b.I_0_max}},
            {"I_cell", {b.I_cell_min, b.I_cell_max}},
            {"V", {b.V_min, b.V_max}},
            {"T", {b.T_min, b.T_max}},
            {"t_f_max", b.t_f_max}}},
          {"soc_target", p.soc_target},
          {"initial", cells}};
}

ChargingProblem problem_from_json(const nlohmann::json& j) {
  ChargingProblem p;
  if (j.contains("scheme")) p.scheme = scheme_from_string(j.at("scheme"));
  if (j.contains("layout")) {
    const std::string l = j.at("layout");
    if (l == "with-I0") p.layout = VariableLayout::kWithI0;
    else if (l == "cell-current") p.layout = VariableLayout::kCellCurrent;
    else throw std::invalid_argument("unknown variable layout '" + l + "'");
  }
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    p.weights.alpha = w.value("alpha", p.weights.alpha);
    p.weights.beta1 = w.value("beta1", p.weights.beta1);
    p.weights.beta2 = w.value("beta2", p.weights.beta2);
    p.weights.beta3 = w.value("beta3", p.weights.beta3);
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    auto pair = [&](const char* key, double& lo, double& hi) {
      if (b.contains(key)) {
        lo = b.at(key).at(0);
        hi = b.at(key).at(1);
      }
    };
    pair("I_B", p.bounds.I_B_min, p.bounds.I_B_max);
    pair("I_0", p.bounds.I_0_min, p.bounds.I_0_max);
    pair("I_cell", p.bounds.I_cell_min, p.bounds.I_cell_max);
    pair("V", p.bounds.V_min, p.bounds.V_max);
    pair("T", p.bounds.T_min, p.bounds.T_max);
    p.bounds.t_f_max = b.value("t_f_max", p.bounds.t_f_max);
  }
  p.soc_target = j.value("soc_target", p.soc_target);
  if (j.contains("initial")) {
    for (const auto& c : j.at("initial")) {
      CellInitial ci;
      ci.soc = c.value("soc", ci.soc);
      ci.L_sei = c.value("L_sei", ci.L_sei);
      ci.Q = c.value("Q", ci.Q);
      ci.T = c.value("T", ci.T);
      p.initial.push_back(ci);
    }
  }
  return p;
}

int decision_variable_count(const ChargingProblem& p, int n_states) {
  const int inputs = p.layout == VariableLayout::kWithI0 ? p.n_cell() + 1 : p.n_cell();
  return n_states + inputs + p.n_tf();
}

CostBreakdown cost(const ChargingProblem& problem, const TerminalSummary& s) {
  const std::size_t n = problem.initial.size();
  const std::size_t n_tf = problem.scheme == Scheme::kSCT ? 1 : n;
  if (s.t_f.size() < n_tf || s.L_end.size() != n || s.mean_dLdt.size() != n) {
    throw std::invalid_argument("cost: terminal data missing for some cells");
  }
  const auto c = cost_terms<double>(problem.weights, problem.scheme, s.t_f, s.L_end, s.mean_dLdt);
  return {c.h, c.g1, c.g2, c.J};
}

std::string to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::kInputBox: return "input-box";
    case ConstraintKind::kVoltagePath: return "voltage-path";
    case ConstraintKind::kTemperaturePath: return "temperature-path";
    case ConstraintKind::kStoichiometryBox: return "stoichiometry-box";
    case ConstraintKind::kInitialCondition: return "initial-condition";
    case ConstraintKind::kTerminalSoc: return "terminal-soc";
    case ConstraintKind::kFinalTimeBox: return "final-time-box";
  }
  return "unknown";
}

std::vector<ConstraintDescriptor> constraint_set(const ChargingProblem& problem,
                                                 const ModuleParameters& mp) {
  if (mp.n_cell() != problem.n_cell()) {
    throw std::invalid_argument("constraint_set: problem and module disagree on the cell count");
  }
  const auto& b = problem.bounds;
  const bool dct = problem.scheme == Scheme::kDCT;
  std::vector<ConstraintDescriptor> out;
  const auto path = [&](int k) -> std::string {
    return dct ? "[0, t_f_" + std::to_string(k + 1) + "]" : "[0, t_f]";
  };
  if (problem.layout == VariableLayout::kWithI0) {
    out.push_back({ConstraintKind::kInputBox, -1, "I_0", b.I_0_min, b.I_0_max, dct ? "[0, max t_f_k]" : "[0, t_f]"});
  }
  for (int k = 0; k < problem.n_cell(); ++k) {
    const auto& cell = mp.cells[k];
    if (problem.layout == VariableLayout::kWithI0) {
      out.push_back({ConstraintKind::kInputBox, k, "I_B", b.I_B_min, b.I_B_max, path(k)});
    } else {
      out.push_back({ConstraintKind::kInputBox, k, "I_cell", b.I_cell_min, b.I_cell_max, path(k)});
    }
    out.push_back({ConstraintKind::kVoltagePath, k, "V_cell", b.V_min, b.V_max, path(k)});
    out.push_back({ConstraintKind::kTemperaturePath, k, "T_c", b.T_min, b.T_max, path(k)});
    out.push_back({ConstraintKind::kTemperaturePath, k, "T_s", b.T_min, b.T_max, path(k)});
    for (auto [e, name] : {std::pair{Electrode::kNeg, "c_s_n"}, std::pair{Electrode::kPos, "c_s_p"}}) {
      const auto& el = cell.of(e);
      out.push_back({ConstraintKind::kStoichiometryBox, k, name, el.theta_min() * el.c_s_max,
                     el.theta_max() * el.c_s_max, path(k)});
    }
    const auto& ic = problem.initial[k];
    out.push_back({ConstraintKind::kInitialCondition, k, "SOC", ic.soc, ic.soc, "t = 0"});
    out.push_back({ConstraintKind::kInitialCondition, k, "T", ic.T, ic.T, "t = 0"});
    out.push_back({ConstraintKind::kInitialCondition, k, "L_sei", ic.L_sei, ic.L_sei, "t = 0"});
    out.push_back({ConstraintKind::kInitialCondition, k, "Q", ic.Q, ic.Q, "t = 0"});
    out.push_back({ConstraintKind::kTerminalSoc, k, "SOC", problem.soc_target, problem.soc_target,
                   dct ? "t = t_f_" + std::to_string(k + 1) : "t = t_f"});
    if (dct) out.push_back({ConstraintKind::kFinalTimeBox, k, "t_f", 0.0, b.t_f_max, "scalar"});
  }
  if (!dct) out.push_back({ConstraintKind::kFinalTimeBox, -1, "t_f", 0.0, b.t_f_max, "scalar"});
  return out;
}

ChargingProblem to_cell_current_layout(const ChargingProblem& problem) {
  if (problem.layout == VariableLayout::kCellCurrent) {
    throw std::invalid_argument("problem already uses the cell-current layout");
  }
  ChargingProblem p = problem;
  p.layout = VariableLayout::kCellCurrent;
  p.bounds.I_cell_min = problem.bounds.I_0_min - problem.bounds.I_B_max;
  p.bounds.I_cell_max = problem.bounds.I_0_max - problem.bounds.I_B_min;
  return p;
}

ModuleInput reconstruct_input(std::span<const double> I_cell) {
  if (I_cell.empty()) throw std::invalid_argument("reconstruct_input: no cells");
  ModuleInput in;
  in.I_0 = *std::min_element(I_cell.begin(), I_cell.end());
  for (double I : I_cell) in.I_B.push_back(in.I_0 - I);
  return in;
}

void check_reachable(const ChargingProblem& problem, const ModuleParameters& mp) {
  const auto& b = problem.bounds;
  const double I_max = problem.layout == VariableLayout::kWithI0
                           ? std::abs(b.I_0_min - b.I_B_max)
                           : std::max(std::abs(b.I_cell_min), std::abs(b.I_cell_max));
  for (int k = 0; k < problem.n_cell(); ++k) {
    const double need = (problem.soc_target - problem.initial[k].soc) * mp.cells[k].Q_nom * 3600.0;
    const double t_min = need / I_max;
    if (t_min > b.t_f_max) {
      throw InfeasibleProblem("cell " + std::to_string(k + 1) + " needs at least " + std::to_string(t_min) +
                              " s at the largest admissible current, beyond t_f_max = " +
                              std::to_string(b.t_f_max) + " s");
    }
  }
}

}  // namespace bmsopt
