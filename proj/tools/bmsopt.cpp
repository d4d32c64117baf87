#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "bmsopt/harness.hpp"

using namespace bmsopt;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOptimal = 0;
constexpr int kExitNonOptimal = 2;
constexpr int kExitInvalid = 3;

struct Globals {
  std::string scenario;
  std::string scheme;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
  std::string mode;
};

Scenario load(const Globals& g) {
  if (g.scenario.empty()) throw InvalidScenario("--scenario is required");
  auto sc = load_scenario(g.scenario);
  if (!g.scheme.empty()) {
    try {
      sc.problem.scheme = scheme_from_string(g.scheme);
    } catch (const std::exception& e) {
      throw InvalidScenario(e.what());
    }
  }
  if (g.alpha) {
    if (*g.alpha < 0 || *g.alpha > 1) throw InvalidScenario("--alpha must lie in [0, 1]");
    sc.problem.weights.alpha = *g.alpha;
  }
  if (g.seed) sc.seed = *g.seed;
  if (!g.out.empty()) sc.out = g.out;
  if (!g.mode.empty()) {
    try {
      sc.mode = fidelity_from_string(g.mode);
    } catch (const std::exception& e) {
      throw InvalidScenario(e.what());
    }
  }
  return sc;
}

void print_record(const RunRecord& r) {
  std::cout << std::setprecision(6) << r.scheme << " T=" << r.T_amb << " K alpha=" << r.alpha
            << " status=" << to_string(r.status) << " iter=" << r.iterations << " J=" << r.cost.J;
  for (std::size_t k = 0; k < r.t_f.size(); ++k) {
    std::cout << " | cell" << k + 1 << " t_f=" << r.t_f[k] << " dL=" << r.dL_pct[k] << "% dQ=" << r.dQ_pct[k] << "%";
  }
  std::cout << " | kkt=" << r.kkt.max() << " gap(soc=" << r.gap.soc_abs << ", L=" << r.gap.L_rel << ")"
            << " " << r.wall_time << " s\n";
  if (!r.optimal() && !r.message.empty()) std::cerr << "  " << r.message << "\n";
}

int status_code(const std::vector<RunRecord>& recs) {
  for (const auto& r : recs) {
    if (!r.optimal()) return kExitNonOptimal;
  }
  return kExitOptimal;
}

int cmd_solve(const Globals& g) {
  const auto sc = load(g);
  const auto r = run_scenario(sc, {g.jobs, true});
  print_record(r);
  std::cout << "wrote " << sc.out.string() << "\n";
  return r.optimal() ? kExitOptimal : kExitNonOptimal;
}

int cmd_sweep(const Globals& g, const std::vector<double>& temps) {
  const auto sc = load(g);
  const auto recs = sweep_temperature(sc, temps, g.jobs);
  for (const auto& r : recs) print_record(r);
  return status_code(recs);
}

int cmd_robustness(const Globals& g, const std::string& kind, std::optional<double> lo, std::optional<double> hi,
                   int n_sim, const std::vector<double>& temps) {
  const auto sc = load(g);
  Imbalance imb;
  if (kind == "soc") {
    imb = {ImbalanceKind::kSoc, 0.2, 0.4};
  } else if (kind == "lsei") {
    imb = {ImbalanceKind::kLsei, 4e-9, 6e-9};
  } else {
    throw InvalidScenario("unknown imbalance '" + kind + "' (expected soc or lsei)");
  }
  if (lo) imb.lo = *lo;
  if (hi) imb.hi = *hi;
  const auto recs = robustness_study(sc, imb, n_sim, temps, g.jobs);
  for (const auto& row : summarize_robustness(recs)) {
    std::cout << std::setprecision(6) << row.scheme << " T=" << row.T_amb << " K max dL=" << row.max_dL
              << "% max t_f=" << row.max_tf << " s optimal " << row.optimal << "/" << row.runs << "\n";
  }
  std::cout << "wrote " << (sc.out / "summary.json").string() << "\n";
  return status_code(recs);
}

int cmd_pareto(const Globals& g, const std::vector<double>& alphas) {
  const auto sc = load(g);
  const auto pts = pareto_sweep(sc, alphas, g.jobs);
  bool ok = true;
  for (const auto& p : pts) {
    std::cout << std::setprecision(6) << p.scheme << " alpha=" << p.alpha << " mean t_f=" << p.mean_tf
              << " s max dL=" << p.max_dL << "%" << (p.optimal ? "" : " (not optimal)") << "\n";
    ok = ok && p.optimal;
  }
  return ok ? kExitOptimal : kExitNonOptimal;
}

int cmd_cycle(const Globals& g, const std::vector<std::string>& protocols, int n_cycles, int resolve_every) {
  const auto sc = load(g);
  const auto res = cycling_comparison(sc, protocols, n_cycles, resolve_every, g.jobs);
  for (const auto& r : res) {
    std::cout << std::setprecision(6) << r.protocol << " first charge " << r.first_charge_time << " s loss";
    for (double v : r.loss_pct) std::cout << " " << v;
    std::cout << " %\n";
  }
  return kExitOptimal;
}

int cmd_surrogate_fit(const Globals& g, const std::string& cell_file, const std::string& out_file) {
  CellParameters cell;
  if (!cell_file.empty()) {
    cell = load_cell(cell_file);
  } else {
    const auto sc = load(g);
    cell = load_module(sc.module_file).cells.front();
  }
  std::vector<CalibrationSample> samples;
  const auto model = build_surrogate(cell, default_training_grid(cell.Q_nom), g.jobs, &samples);
  model.save(out_file);
  double worst = 0.0;
  for (const auto& s : samples) worst = std::max(worst, s.rel_residual);
  std::cout << "fitted " << samples.size() << " points, max relative residual " << worst << ", wrote " << out_file
            << "\n";
  return kExitOptimal;
}

int cmd_certify(const Globals& g, const std::string& run_dir, double tol) {
  const fs::path dir = run_dir.empty() ? fs::path(g.out) : fs::path(run_dir);
  if (dir.empty()) throw InvalidScenario("certify needs a run directory");
  std::ifstream sin(dir / "scenario.json"), pin(dir / "solution.json");
  if (!sin || !pin) throw InvalidScenario("run directory " + dir.string() + " lacks scenario.json/solution.json");
  nlohmann::json sj, pj;
  sin >> sj;
  pin >> pj;
  // Paths in a persisted scenario are already resolved.
  const auto sc = scenario_from_json(sj, fs::path());
  const auto mp = scenario_module(sc, g.jobs);
  auto tr = transcribe(sc.problem, mp, sc.disc);
  NlpSolution sol;
  sol.P = pj.at("P").get<std::vector<double>>();
  const auto& m = pj.at("multipliers");
  sol.mult.lambda = m.at("lambda").get<std::vector<double>>();
  sol.mult.y_lo = m.at("y_lo").get<std::vector<double>>();
  sol.mult.y_hi = m.at("y_hi").get<std::vector<double>>();
  sol.mult.z_lo = m.at("z_lo").get<std::vector<double>>();
  sol.mult.z_hi = m.at("z_hi").get<std::vector<double>>();
  sol.status = solver_status_from_string(pj.at("status"));
  if (static_cast<int>(sol.P.size()) != tr->nlp.n) throw InvalidScenario("solution does not match the scenario");
  const auto cert = certify(tr->nlp, sol, tol);
  std::cout << std::setw(2) << cert.to_json() << "\n";
  return cert.passed() ? kExitOptimal : kExitNonOptimal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal charging of battery modules with cell balancing"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--scenario", g.scenario, "scenario JSON file");
  app.add_option("--scheme", g.scheme, "sct or dct");
  app.add_option("--alpha", g.alpha, "trade-off weight in [0, 1]");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--mode", g.mode, "hf or surrogate (re-simulation and cycling)");

  std::vector<double> temps{288.15, 298.15, 308.15};
  std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::string> protocols{"3C", "8C", "sct", "dct"};
  std::string imbalance = "soc", cell_file, sur_out = "surrogate.json", run_dir;
  std::optional<double> lo, hi;
  int n_sim = 5, n_cycles = 20, resolve_every = 0;
  double tol = 1e-6;

  auto* solve = app.add_subcommand("solve", "solve one scenario");
  auto* sweep = app.add_subcommand("sweep-temp", "both schemes across ambient temperatures");
  sweep->add_option("--temps", temps, "ambient temperatures [K]");
  auto* robust = app.add_subcommand("robustness", "randomized initial imbalance");
  robust->add_option("--imbalance", imbalance, "soc or lsei");
  robust->add_option("--lo", lo, "lower end of the uniform interval");
  robust->add_option("--hi", hi, "upper end of the uniform interval");
  robust->add_option("--n-sim", n_sim, "solves per temperature and scheme");
  robust->add_option("--temps", temps, "ambient temperatures [K]");
  auto* pareto = app.add_subcommand("pareto", "sweep the trade-off weight");
  pareto->add_option("--alphas", alphas, "alpha values");
  auto* cyc = app.add_subcommand("cycle", "constant-current vs optimal cycling");
  cyc->add_option("--protocols", protocols, "e.g. 3C 8C sct dct");
  cyc->add_option("--cycles", n_cycles, "number of cycles");
  cyc->add_option("--resolve-every", resolve_every, "re-solve the optimal profile every N cycles (0: never)");
  auto* sur = app.add_subcommand("surrogate", "solvent surrogate tools");
  sur->require_subcommand(1);
  auto* fit = sur->add_subcommand("fit", "calibrate and fit on the default grid");
  fit->add_option("--cell", cell_file, "cell parameter file (default: first cell of the scenario module)");
  fit->add_option("-o,--output", sur_out, "surrogate JSON to write");
  auto* cert = app.add_subcommand("certify", "recheck the KKT conditions of a persisted run");
  cert->add_option("run", run_dir, "run directory (default: --out)");
  cert->add_option("--tol", tol, "residual tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*solve) return cmd_solve(g);
    if (*sweep) return cmd_sweep(g, temps);
    if (*robust) return cmd_robustness(g, imbalance, lo, hi, n_sim, temps);
    if (*pareto) return cmd_pareto(g, alphas);
    if (*cyc) return cmd_cycle(g, protocols, n_cycles, resolve_every);
    if (*fit) return cmd_surrogate_fit(g, cell_file, sur_out);
    if (*cert) return cmd_certify(g, run_dir, tol);
  } catch (const InvalidScenario& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const InfeasibleProblem& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNonOptimal;
  }
  return kExitInvalid;
}
