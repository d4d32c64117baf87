#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmsopt/collocation.hpp"
#include "bmsopt/ip_solver.hpp"
#include "bmsopt/module_model.hpp"
#include "bmsopt/ocp.hpp"

namespace bmsopt {

/// One charging study: module file, surrogate, problem and run settings.
/// Relative paths are resolved against the scenario file's directory.
struct Scenario {
  std::filesystem::path module_file;
  std::filesystem::path surrogate_file;  // fitted on demand when missing
  double T_amb = 298.15;
  std::optional<double> R_m;
  ChargingProblem problem;
  std::uint64_t seed = 1;
  Discretization disc;
  SolverOptions solver;
  Fidelity mode = Fidelity::kSurrogate;  // re-simulation and cycling
  std::filesystem::path out;

  nlohmann::json to_json() const;
  /// FNV-1a over the canonical JSON, excluding the output directory.
  std::string hash() const;
  /// Same study at another ambient temperature; initial cell temperatures
  /// follow the ambient.
  Scenario at_temperature(double T) const;
  Scenario with_scheme(Scheme s) const;
  Scenario with_alpha(double alpha) const;
};

class InvalidScenario : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

ModuleParameters scenario_module(const Scenario& sc, int jobs = 1);

/// Loads the surrogate file or, if it does not exist, calibrates on the
/// default grid with the first cell and writes it there.
SurrogateModel obtain_surrogate(const Scenario& sc, const ModuleParameters& mp, int jobs = 1);

struct ResimulationGap {
  double soc_abs = 0.0;  // max over cells |SOC_sim - SOC_col| at t_f_k
  double L_rel = 0.0;    // max over cells |L_sim - L_col| / L_col
};

struct RunRecord {
  std::string hash;
  std::string scheme;
  double T_amb = 0.0;
  double alpha = 0.0;
  SolverStatus status = SolverStatus::kMaxIter;
  int iterations = 0;
  std::vector<double> t_f, dL_pct, dQ_pct, soc_end;
  CostBreakdown cost;
  KktResiduals kkt;
  bool certified = false;
  ResimulationGap gap;
  double wall_time = 0.0;
  std::string dir;
  std::string message;

  bool optimal() const { return status == SolverStatus::kOptimal; }
  double max_dL() const;
  double max_tf() const;
  double mean_tf() const;
  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

SolverStatus solver_status_from_string(const std::string& s);

struct RunOptions {
  int jobs = 1;          // surrogate calibration threads
  bool persist = true;   // write the run directory
};

/// Calibrate/load surrogate, transcribe, solve, certify, re-simulate and
/// persist scenario.json, solution.json, trajectory.csv, iterations.csv and
/// certificate.json under sc.out.
RunRecord run_scenario(const Scenario& sc, const RunOptions& opt = {});

/// Runs fn(i) for i in [0, n) on at most `jobs` threads. The first exception
/// is rethrown after all workers finish.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

/// Both schemes at every temperature [K]; writes one Table II style CSV per
/// temperature (scheme, dL_sei, dQ and t_f per cell) plus sweep.json.
std::vector<RunRecord> sweep_temperature(const Scenario& base, const std::vector<double>& temps, int jobs);
void write_table(const std::vector<RunRecord>& rows, const std::filesystem::path& path);

enum class ImbalanceKind { kSoc, kLsei };

struct Imbalance {
  ImbalanceKind kind = ImbalanceKind::kSoc;
  double lo = 0.2, hi = 0.4;
};

struct RobustnessRow {
  double T_amb;
  std::string scheme;
  double max_dL;  // max over runs of max over cells [%]
  double max_tf;  // [s]
  int runs;
  int optimal;
};

/// Independent uniform draws per cell, drawn up front from mt19937_64(seed)
/// so results do not depend on the job count.
std::vector<RunRecord> robustness_study(const Scenario& base, const Imbalance& imb, int n_sim,
                                        const std::vector<double>& temps, int jobs);
/// Aggregates recomputed from run records only.
std::vector<RobustnessRow> summarize_robustness(const std::vector<RunRecord>& records);
nlohmann::json robustness_summary_json(const std::vector<RobustnessRow>& rows);

struct ParetoPoint {
  std::string scheme;
  double alpha;
  double mean_tf;
  double max_dL;
  bool optimal;
};

std::vector<ParetoPoint> pareto_sweep(const Scenario& base, const std::vector<double>& alphas, int jobs);

struct CycleOutcome {
  std::string protocol;
  double first_charge_time = 0.0;
  std::vector<double> loss_pct;  // after the last cycle
  std::vector<CycleRecord> cycles;
  double max_loss() const;
};

/// Protocols are "<rate>C" for constant current, or "sct" / "dct" for the
/// optimal profile solved on the first cycle and replayed with SOC cutoff
/// (re-solved every `resolve_every` cycles when positive).
std::vector<CycleOutcome> cycling_comparison(const Scenario& base, const std::vector<std::string>& protocols,
                                             int n_cycles, int resolve_every, int jobs);

}  // namespace bmsopt
