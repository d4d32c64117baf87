#include "bmsopt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace bmsopt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setw(2) << j << "\n";
}

std::string format_temperature(double T) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << T;
  return s.str();
}

json solver_to_json(const SolverOptions& o) {
  return {{"tol", o.tol}, {"mu_init", o.mu_init}, {"max_iter", o.max_iter}};
}

void solver_from_json(const json& j, SolverOptions& o) {
  o.tol = j.value("tol", o.tol);
  o.mu_init = j.value("mu_init", o.mu_init);
  o.max_iter = j.value("max_iter", o.max_iter);
  o.verbose = j.value("verbose", o.verbose);
}

}  // namespace

json Scenario::to_json() const {
  json j;
  j["module"] = module_file.string();
  j["surrogate"] = surrogate_file.string();
  j["T_amb"] = T_amb;
  if (R_m) j["R_m"] = *R_m;
  j["problem"] = bmsopt::to_json(problem);
  j["seed"] = seed;
  j["discretization"] = {{"n_segments", disc.n_segments}, {"q", disc.q}};
  j["solver"] = solver_to_json(solver);
  j["mode"] = bmsopt::to_string(mode);
  j["out"] = out.string();
  return j;
}

std::string Scenario::hash() const {
  auto j = to_json();
  j.erase("out");
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Scenario Scenario::at_temperature(double T) const {
  Scenario s = *this;
  s.T_amb = T;
  for (auto& c : s.problem.initial) c.T = T;
  return s;
}

Scenario Scenario::with_scheme(Scheme sch) const {
  Scenario s = *this;
  s.problem.scheme = sch;
  return s;
}

Scenario Scenario::with_alpha(double alpha) const {
  Scenario s = *this;
  s.problem.weights.alpha = alpha;
  return s;
}

Scenario scenario_from_json(const json& j, const fs::path& base_dir) {
  Scenario sc;
  try {
    if (!j.contains("module")) throw InvalidScenario("scenario needs a module file");
    sc.module_file = resolve(j.at("module").get<std::string>(), base_dir);
    if (j.contains("surrogate")) sc.surrogate_file = resolve(j.at("surrogate").get<std::string>(), base_dir);
    sc.T_amb = j.value("T_amb", sc.T_amb);
    if (j.contains("R_m")) sc.R_m = j.at("R_m").get<double>();
    sc.seed = j.value("seed", sc.seed);
    if (j.contains("problem")) {
      const auto& pj = j.at("problem");
      sc.problem = problem_from_json(pj);
      if (pj.contains("initial")) {
        for (std::size_t k = 0; k < sc.problem.initial.size(); ++k) {
          if (!pj.at("initial").at(k).contains("T")) sc.problem.initial[k].T = sc.T_amb;
        }
      }
    }
    if (j.contains("discretization")) {
      const auto& d = j.at("discretization");
      sc.disc.n_segments = d.value("n_segments", sc.disc.n_segments);
      sc.disc.q = d.value("q", sc.disc.q);
    }
    if (j.contains("solver")) solver_from_json(j.at("solver"), sc.solver);
    if (j.contains("mode")) sc.mode = fidelity_from_string(j.at("mode"));
    sc.out = resolve(j.value("out", std::string("runs")), base_dir);
  } catch (const InvalidScenario&) {
    throw;
  } catch (const std::exception& e) {
    throw InvalidScenario(std::string("invalid scenario: ") + e.what());
  }
  if (sc.problem.initial.empty()) throw InvalidScenario("scenario problem needs initial cell states");
  if (!(sc.T_amb > 0)) throw InvalidScenario("T_amb must be positive");
  if (sc.disc.n_segments < 1 || sc.disc.q < 1) throw InvalidScenario("discretization must be positive");
  try {
    sc.problem.validate();
    sc.solver.validate();
  } catch (const std::exception& e) {
    throw InvalidScenario(e.what());
  }
  return sc;
}

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidScenario("cannot open scenario " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InvalidScenario("scenario " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j, path.parent_path());
}

SurrogateModel obtain_surrogate(const Scenario& sc, const ModuleParameters& mp, int jobs) {
  if (!sc.surrogate_file.empty() && fs::exists(sc.surrogate_file)) {
    return SurrogateModel::load(sc.surrogate_file);
  }
  auto model = build_surrogate(mp.cells.front(), default_training_grid(mp.cells.front().Q_nom), jobs);
  if (!sc.surrogate_file.empty()) {
    if (sc.surrogate_file.has_parent_path()) fs::create_directories(sc.surrogate_file.parent_path());
    model.save(sc.surrogate_file);
  }
  return model;
}

ModuleParameters scenario_module(const Scenario& sc, int jobs) {
  ModuleParameters mp;
  try {
    mp = load_module(sc.module_file);
  } catch (const std::exception& e) {
    throw InvalidScenario(e.what());
  }
  mp.T_amb = sc.T_amb;
  if (sc.R_m) mp.R_m = *sc.R_m;
  if (mp.n_cell() != sc.problem.n_cell()) {
    throw InvalidScenario("module has " + std::to_string(mp.n_cell()) + " cells but the problem gives " +
                          std::to_string(sc.problem.n_cell()) + " initial states");
  }
  // One surrogate shared by all cells of the module.
  mp.solvent.models = {obtain_surrogate(sc, mp, jobs)};
  return mp;
}

double RunRecord::max_dL() const {
  return dL_pct.empty() ? 0.0 : *std::max_element(dL_pct.begin(), dL_pct.end());
}

double RunRecord::max_tf() const {
  return t_f.empty() ? 0.0 : *std::max_element(t_f.begin(), t_f.end());
}

double RunRecord::mean_tf() const {
  double s = 0.0;
  for (double t : t_f) s += t;
  return t_f.empty() ? 0.0 : s / t_f.size();
}

SolverStatus solver_status_from_string(const std::string& s) {
  for (auto st : {SolverStatus::kOptimal, SolverStatus::kMaxIter, SolverStatus::kInfeasibleDetected,
                  SolverStatus::kLineSearchFailure}) {
    if (to_string(st) == s) return st;
  }
  throw std::invalid_argument("unknown solver status '" + s + "'");
}

json RunRecord::to_json() const {
  return {{"hash", hash},
          {"scheme", scheme},
          {"T_amb", T_amb},
          {"alpha", alpha},
          {"status", to_string(status)},
          {"iterations", iterations},
          {"t_f", t_f},
          {"dL_pct", dL_pct},
          {"dQ_pct", dQ_pct},
          {"soc_end", soc_end},
          {"cost", {{"J", cost.J}, {"h", cost.h}, {"g1", cost.g1}, {"g2", cost.g2}}},
          {"kkt",
           {{"stationarity", kkt.stationarity},
            {"primal", kkt.primal},
            {"dual", kkt.dual},
            {"complementarity", kkt.complementarity}}},
          {"certified", certified},
          {"resim_gap", {{"soc_abs", gap.soc_abs}, {"L_rel", gap.L_rel}}},
          {"wall_time", wall_time},
          {"dir", dir},
          {"message", message}};
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  r.hash = j.value("hash", "");
  r.scheme = j.at("scheme");
  r.T_amb = j.at("T_amb");
  r.alpha = j.value("alpha", 0.0);
  r.status = solver_status_from_string(j.at("status"));
  r.iterations = j.value("iterations", 0);
  r.t_f = j.at("t_f").get<std::vector<double>>();
  r.dL_pct = j.at("dL_pct").get<std::vector<double>>();
  r.dQ_pct = j.value("dQ_pct", std::vector<double>{});
  r.soc_end = j.value("soc_end", std::vector<double>{});
  if (j.contains("cost")) {
    const auto& c = j.at("cost");
    r.cost = {c.value("h", 0.0), c.value("g1", 0.0), c.value("g2", 0.0), c.value("J", 0.0)};
  }
  if (j.contains("kkt")) {
    const auto& k = j.at("kkt");
    r.kkt.stationarity = k.value("stationarity", 0.0);
    r.kkt.primal = k.value("primal", 0.0);
    r.kkt.dual = k.value("dual", 0.0);
    r.kkt.complementarity = k.value("complementarity", 0.0);
  }
  r.certified = j.value("certified", false);
  if (j.contains("resim_gap")) {
    r.gap.soc_abs = j.at("resim_gap").value("soc_abs", 0.0);
    r.gap.L_rel = j.at("resim_gap").value("L_rel", 0.0);
  }
  r.wall_time = j.value("wall_time", 0.0);
  r.dir = j.value("dir", "");
  r.message = j.value("message", "");
  return r;
}

namespace {

std::vector<CellState> initial_cells(const ModuleParameters& mp, const ChargingProblem& pr, Fidelity mode) {
  std::vector<CellState> cells;
  for (int k = 0; k < pr.n_cell(); ++k) {
    const auto& ic = pr.initial[k];
    cells.push_back(CellState::at_rest(mp.cells[k], ic.soc, ic.T, ic.L_sei, ic.Q, mode == Fidelity::kHighFidelity));
  }
  return cells;
}

// Open-loop replay of the optimal inputs; each cell is compared against the
// collocation solution at its own final time.
ResimulationGap resimulate(const Transcription& tr, const std::vector<double>& P, const ModuleParameters& mp,
                           const ModuleState& x0) {
  ResimulationGap gap;
  const auto tf = tr.final_times(P);
  const auto& lay = x0.layout;
  for (int k = 0; k < tr.layout.n_cell; ++k) {
    SimulationOptions o;
    o.horizon = tf[k];
    o.sample_dt = 0.0;
    o.stop_when_all_done = false;
    auto traj = simulate(mp, x0, tr.input_profile(P), o);
    const auto& x = traj.final_state();
    const auto xc = tr.state_at(P, tr.tau_final(k));
    const double soc_sim = cell_outputs(mp, lay, x, k, 0.0).soc;
    const double soc_col = tr.soc_at(P, k, tr.tau_final(k));
    const double L_col = xc[tr.layout.L_sei(k)];
    gap.soc_abs = std::max(gap.soc_abs, std::abs(soc_sim - soc_col));
    gap.L_rel = std::max(gap.L_rel, std::abs(x[lay.L_sei(k)] - L_col) / L_col);
  }
  return gap;
}

json solution_json(const NlpSolution& sol, const Transcription& tr) {
  json j;
  j["status"] = to_string(sol.status);
  j["objective"] = sol.objective;
  j["P"] = sol.P;
  j["t_f"] = tr.final_times(sol.P);
  j["multipliers"] = {{"lambda", sol.mult.lambda},
                      {"y_lo", sol.mult.y_lo},
                      {"y_hi", sol.mult.y_hi},
                      {"z_lo", sol.mult.z_lo},
                      {"z_hi", sol.mult.z_hi}};
  return j;
}

}  // namespace

RunRecord run_scenario(const Scenario& sc, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.hash = sc.hash();
  rec.scheme = to_string(sc.problem.scheme);
  rec.T_amb = sc.T_amb;
  rec.alpha = sc.problem.weights.alpha;
  rec.dir = sc.out.string();

  const auto mp = scenario_module(sc, opt.jobs);
  auto tr = transcribe(sc.problem, mp, sc.disc);
  auto sol = solve(tr->nlp, sc.solver);
  const auto cert = certify(tr->nlp, sol, sc.solver.tol);

  rec.status = sol.status;
  rec.iterations = sol.iterations;
  rec.message = sol.message;
  rec.kkt = cert.kkt;
  rec.certified = sol.optimal() && cert.passed();
  rec.t_f = tr->final_times(sol.P);
  rec.cost = tr->cost(sol.P);
  for (int k = 0; k < sc.problem.n_cell(); ++k) {
    const auto& ic = sc.problem.initial[k];
    const auto x = tr->state_at(sol.P, tr->tau_final(k));
    rec.dL_pct.push_back((x[tr->layout.L_sei(k)] - ic.L_sei) / ic.L_sei * 100.0);
    rec.dQ_pct.push_back((ic.Q - x[tr->layout.Q(k)]) / ic.Q * 100.0);
    rec.soc_end.push_back(tr->soc_at(sol.P, k, tr->tau_final(k)));
  }

  ModuleParameters sim_mp = mp;
  const auto x0 = ModuleState::from_cells(sim_mp, initial_cells(sim_mp, sc.problem, sc.mode), sc.mode);
  Trajectory traj;
  try {
    rec.gap = resimulate(*tr, sol.P, sim_mp, x0);
    SimulationOptions o;
    o.horizon = tr->horizon(sol.P);
    o.sample_dt = 1.0;
    o.stop_when_all_done = false;
    traj = simulate(sim_mp, x0, tr->input_profile(sol.P), o);
  } catch (const std::exception& e) {
    rec.gap = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    rec.message += (rec.message.empty() ? "" : "; ") + std::string("re-simulation failed: ") + e.what();
  }

  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (opt.persist) {
    fs::create_directories(sc.out);
    write_json(sc.to_json(), sc.out / "scenario.json");
    write_json(solution_json(sol, *tr), sc.out / "solution.json");
    if (!traj.samples.empty()) traj.write_csv(sc.out / "trajectory.csv");
    write_iterations_csv(sol.history, sc.out / "iterations.csv");
    auto cj = cert.to_json();
    cj["hash"] = rec.hash;
    write_json(cj, sc.out / "certificate.json");
    write_json(rec.to_json(), sc.out / "record.json");
  }
  return rec;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  jobs = std::clamp(jobs, 1, n);
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex m;
  auto worker = [&] {
    for (int i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(m);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

namespace {

// Calibrates once up front so parallel runs do not race on the file.
void ensure_surrogate(const Scenario& base, int jobs) {
  if (base.surrogate_file.empty() || fs::exists(base.surrogate_file)) return;
  (void)scenario_module(base, jobs);
}

RunRecord run_safely(const Scenario& sc) {
  try {
    return run_scenario(sc);
  } catch (const std::exception& e) {
    RunRecord r;
    r.hash = sc.hash();
    r.scheme = to_string(sc.problem.scheme);
    r.T_amb = sc.T_amb;
    r.alpha = sc.problem.weights.alpha;
    r.status = SolverStatus::kInfeasibleDetected;
    r.dir = sc.out.string();
    r.message = e.what();
    return r;
  }
}

}  // namespace

void write_table(const std::vector<RunRecord>& rows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const int N = rows.empty() ? 0 : static_cast<int>(rows.front().t_f.size());
  out << "scheme";
  for (int k = 1; k <= N; ++k) out << ",dL_sei_" << k << "_pct";
  for (int k = 1; k <= N; ++k) out << ",dQ_" << k << "_pct";
  for (int k = 1; k <= N; ++k) out << ",t_f_" << k << "_s";
  out << "\n" << std::setprecision(8);
  for (const auto& r : rows) {
    out << r.scheme;
    for (double v : r.dL_pct) out << "," << v;
    for (double v : r.dQ_pct) out << "," << v;
    for (double v : r.t_f) out << "," << v;
    out << "\n";
  }
}

std::vector<RunRecord> sweep_temperature(const Scenario& base, const std::vector<double>& temps, int jobs) {
  ensure_surrogate(base, jobs);
  std::vector<Scenario> runs;
  for (double T : temps) {
    for (auto s : {Scheme::kSCT, Scheme::kDCT}) {
      auto sc = base.at_temperature(T).with_scheme(s);
      sc.out = base.out / ("T" + format_temperature(T)) / to_string(s);
      runs.push_back(std::move(sc));
    }
  }
  std::vector<RunRecord> recs(runs.size());
  parallel_for(static_cast<int>(runs.size()), jobs, [&](int i) { recs[i] = run_safely(runs[i]); });
  fs::create_directories(base.out);
  json all = json::array();
  for (std::size_t t = 0; t < temps.size(); ++t) {
    write_table({recs[2 * t], recs[2 * t + 1]}, base.out / ("table_T" + format_temperature(temps[t]) + ".csv"));
  }
  for (const auto& r : recs) all.push_back(r.to_json());
  write_json(all, base.out / "sweep.json");
  return recs;
}

std::vector<RunRecord> robustness_study(const Scenario& base, const Imbalance& imb, int n_sim,
                                        const std::vector<double>& temps, int jobs) {
  if (n_sim < 1) throw InvalidScenario("robustness study needs at least one simulation");
  if (!(imb.lo <= imb.hi)) throw InvalidScenario("imbalance interval is empty");
  ensure_surrogate(base, jobs);
  const int N = base.problem.n_cell();
  std::vector<Scenario> runs;
  for (std::size_t t = 0; t < temps.size(); ++t) {
    std::mt19937_64 rng(base.seed + 7919ULL * t);
    std::uniform_real_distribution<double> U(imb.lo, imb.hi);
    for (int i = 0; i < n_sim; ++i) {
      auto sc = base.at_temperature(temps[t]);
      for (int k = 0; k < N; ++k) {
        const double v = imb.lo == imb.hi ? imb.lo : U(rng);
        if (imb.kind == ImbalanceKind::kSoc) sc.problem.initial[k].soc = v;
        else sc.problem.initial[k].L_sei = v;
      }
      for (auto s : {Scheme::kSCT, Scheme::kDCT}) {
        auto r = sc.with_scheme(s);
        std::ostringstream name;
        name << "run" << std::setw(4) << std::setfill('0') << i;
        r.out = base.out / ("T" + format_temperature(temps[t])) / to_string(s) / name.str();
        runs.push_back(std::move(r));
      }
    }
  }
  std::vector<RunRecord> recs(runs.size());
  parallel_for(static_cast<int>(runs.size()), jobs, [&](int i) { recs[i] = run_safely(runs[i]); });
  fs::create_directories(base.out);
  json all = json::array();
  for (const auto& r : recs) all.push_back(r.to_json());
  write_json(all, base.out / "runs.json");
  write_json(robustness_summary_json(summarize_robustness(recs)), base.out / "summary.json");
  return recs;
}

std::vector<RobustnessRow> summarize_robustness(const std::vector<RunRecord>& records) {
  std::vector<RobustnessRow> rows;
  for (const auto& r : records) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const RobustnessRow& x) {
      return x.scheme == r.scheme && std::abs(x.T_amb - r.T_amb) < 1e-9;
    });
    if (it == rows.end()) {
      rows.push_back({r.T_amb, r.scheme, 0.0, 0.0, 0, 0});
      it = rows.end() - 1;
    }
    ++it->runs;
    if (!r.optimal()) continue;
    ++it->optimal;
    it->max_dL = std::max(it->max_dL, r.max_dL());
    it->max_tf = std::max(it->max_tf, r.max_tf());
  }
  return rows;
}

json robustness_summary_json(const std::vector<RobustnessRow>& rows) {
  json j = json::array();
  for (const auto& r : rows) {
    j.push_back({{"T_amb", r.T_amb},
                 {"scheme", r.scheme},
                 {"max_dL_pct", r.max_dL},
                 {"max_t_f", r.max_tf},
                 {"runs", r.runs},
                 {"optimal", r.optimal}});
  }
  return j;
}

std::vector<ParetoPoint> pareto_sweep(const Scenario& base, const std::vector<double>& alphas, int jobs) {
  ensure_surrogate(base, jobs);
  for (double al : alphas) {
    if (!(al >= 0 && al <= 1)) throw InvalidScenario("alpha must lie in [0, 1]");
  }
  // Duplicated weights are solved once and reported at every occurrence.
  std::vector<double> unique = alphas;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  const Scheme schemes[] = {Scheme::kSCT, Scheme::kDCT};
  std::vector<Scenario> runs;
  for (auto s : schemes) {
    for (double al : unique) {
      auto sc = base.with_scheme(s).with_alpha(al);
      std::ostringstream name;
      name << "alpha" << std::fixed << std::setprecision(3) << al;
      sc.out = base.out / to_string(s) / name.str();
      runs.push_back(std::move(sc));
    }
  }
  std::vector<RunRecord> recs(runs.size());
  parallel_for(static_cast<int>(runs.size()), jobs, [&](int i) { recs[i] = run_safely(runs[i]); });
  std::vector<ParetoPoint> pts;
  for (int si = 0; si < 2; ++si) {
    for (double al : alphas) {
      const auto u = std::lower_bound(unique.begin(), unique.end(), al) - unique.begin();
      const auto& r = recs[si * unique.size() + u];
      pts.push_back({r.scheme, r.alpha, r.mean_tf(), r.max_dL(), r.optimal()});
    }
  }
  fs::create_directories(base.out);
  std::ofstream out(base.out / "pareto.csv");
  out << "scheme,alpha,mean_t_f_s,max_dL_sei_pct,optimal\n" << std::setprecision(8);
  for (const auto& p : pts) out << p.scheme << "," << p.alpha << "," << p.mean_tf << "," << p.max_dL << "," << p.optimal << "\n";
  return pts;
}

double CycleOutcome::max_loss() const {
  return loss_pct.empty() ? 0.0 : *std::max_element(loss_pct.begin(), loss_pct.end());
}

namespace {

CycleOutcome run_protocol(const Scenario& base, const ModuleParameters& mp, const std::string& name, int n_cycles,
                          int resolve_every) {
  const int N = base.problem.n_cell();
  CycleOutcome out;
  out.protocol = name;
  CycleSettings cs;
  cs.soc_target = base.problem.soc_target;
  cs.mode = base.mode;
  for (const auto& ic : base.problem.initial) {
    cs.soc_init.push_back(ic.soc);
    cs.L_sei0.push_back(ic.L_sei);
    cs.Q0.push_back(ic.Q);
  }
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "sct" || lower == "dct") {
    const Scheme sch = scheme_from_string(lower);
    int done = 0;
    while (done < n_cycles) {
      auto pr = base.problem;
      pr.scheme = sch;
      for (int k = 0; k < N; ++k) {
        pr.initial[k].L_sei = cs.L_sei0[k];
        pr.initial[k].Q = cs.Q0[k];
      }
      auto tr = transcribe(pr, mp, base.disc);
      auto sol = solve(tr->nlp, base.solver);
      if (!sol.optimal()) {
        throw std::runtime_error(name + ": optimal profile not found (" + to_string(sol.status) + ")");
      }
      const int chunk = resolve_every > 0 ? std::min(resolve_every, n_cycles - done) : n_cycles - done;
      auto recs = cycle(mp, {name, tr->replay_profile(sol.P)}, chunk, cs);
      for (auto& r : recs) {
        r.cycle += done;
        // Losses stay relative to the nominal capacity.
        for (int k = 0; k < N; ++k) r.loss_pct[k] = (mp.cells[k].Q_nom - r.Q[k]) / mp.cells[k].Q_nom * 100.0;
        out.cycles.push_back(r);
      }
      cs.L_sei0 = recs.back().L_sei;
      cs.Q0 = recs.back().Q;
      done += chunk;
    }
  } else {
    if (lower.empty() || lower.back() != 'c') throw InvalidScenario("unknown protocol '" + name + "'");
    double rate = 0.0;
    try {
      rate = std::stod(lower.substr(0, lower.size() - 1));
    } catch (const std::exception&) {
      throw InvalidScenario("unknown protocol '" + name + "'");
    }
    if (!(rate > 0)) throw InvalidScenario("C-rate must be positive");
    out.cycles = cycle(mp, constant_current_protocol(rate, mp.cells.front().Q_nom, N), n_cycles, cs);
  }
  if (out.cycles.empty()) {
    for (int k = 0; k < N; ++k) {
      out.loss_pct.push_back((mp.cells[k].Q_nom - cs.Q0[k]) / mp.cells[k].Q_nom * 100.0);
    }
  } else {
    out.first_charge_time = out.cycles.front().charge_time;
    out.loss_pct = out.cycles.back().loss_pct;
  }
  return out;
}

}  // namespace

std::vector<CycleOutcome> cycling_comparison(const Scenario& base, const std::vector<std::string>& protocols,
                                             int n_cycles, int resolve_every, int jobs) {
  if (n_cycles < 0) throw InvalidScenario("cycle count must be non-negative");
  const auto mp = scenario_module(base, jobs);
  std::vector<CycleOutcome> res(protocols.size());
  parallel_for(static_cast<int>(protocols.size()), jobs,
               [&](int i) { res[i] = run_protocol(base, mp, protocols[i], n_cycles, resolve_every); });
  fs::create_directories(base.out);
  std::ofstream sum(base.out / "cycling.csv");
  const int N = base.problem.n_cell();
  sum << "protocol,first_charge_time_s";
  for (int k = 1; k <= N; ++k) sum << ",loss_" << k << "_pct";
  sum << "\n" << std::setprecision(8);
  for (const auto& r : res) {
    sum << r.protocol << "," << r.first_charge_time;
    for (double v : r.loss_pct) sum << "," << v;
    sum << "\n";
    write_cycles_csv(r.cycles, base.out / ("cycles_" + r.protocol + ".csv"));
  }
  return res;
}

}  // namespace bmsopt
