#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmsopt/nlp.hpp"

namespace bmsopt {

struct SolverOptions {
  double tol = 1e-6;           // on the max KKT residual
  double mu_init = 0.1;
  double mu_factor = 0.2;      // monotone barrier reduction
  double mu_superlinear = 1.5; // mu <- min(factor*mu, mu^1.5)
  double kappa_eps = 10.0;     // barrier subproblem accuracy, relative to mu
  int max_iter = 500;
  double armijo = 1e-4;
  double backtrack = 0.5;
  double tau = 0.995;          // fraction to the boundary
  double delta_w_init = 1e-8;  // first inertia-correction shift
  double delta_w_growth = 10.0;
  double delta_w_max = 1e40;
  double delta_c = 1e-9;       // constraint-block regularization
  double bound_push = 1e-2;
  bool verbose = false;

  void validate() const;
};

enum class SolverStatus { kOptimal, kMaxIter, kInfeasibleDetected, kLineSearchFailure };

std::string to_string(SolverStatus s);

struct IterationRecord {
  int iter;
  double mu;
  double objective;  // scaled objective
  double primal;
  double dual;       // stationarity residual
  double complementarity;
  double step;
  double delta_w;
};

struct NlpSolution {
  std::vector<double> P;
  Multipliers mult;
  KktResiduals kkt;
  SolverStatus status = SolverStatus::kMaxIter;
  int iterations = 0;
  double objective = 0.0;  // unscaled f(P)
  std::vector<IterationRecord> history;
  std::string message;

  bool optimal() const { return status == SolverStatus::kOptimal; }
};

/// Thrown when the model returns NaN/inf or throws at a point where a value
/// is required; carries the offending constraint index (-1 for the objective).
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(int index, const std::string& what) : std::runtime_error(what), index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

NlpSolution solve(const NlpProblem& nlp, const SolverOptions& options = {},
                  const std::optional<std::vector<double>>& initial_guess = std::nullopt);

struct Certificate {
  KktResiduals kkt;
  double tol = 1e-6;
  bool stationarity = false;
  bool primal = false;
  bool dual = false;
  bool complementarity = false;

  bool passed() const { return stationarity && primal && dual && complementarity; }
  nlohmann::json to_json() const;
};

Certificate certify(const NlpProblem& nlp, const NlpSolution& solution, double tol = 1e-6);

void write_iterations_csv(const std::vector<IterationRecord>& history,
                          const std::filesystem::path& path);

}  // namespace bmsopt
