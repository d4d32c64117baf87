#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "bmsopt/harness.hpp"
#include "support.hpp"

using namespace bmsopt;
namespace fs = std::filesystem;

namespace {

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string s;
  std::getline(in, s);
  return s;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BMSOPT_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_scenario(const std::string& name, const nlohmann::json& j) {
  const auto dir = testing::scratch(name);
  fs::create_directories(dir);
  const auto p = dir / "scenario.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

nlohmann::json base_json() {
  std::ifstream in(testing::scenario_dir() / "base.json");
  nlohmann::json j;
  in >> j;
  j["module"] = (testing::data_dir() / "module_2cell.json").string();
  j["surrogate"] = (testing::data_dir() / "surrogate_nmc_graphite.json").string();
  return j;
}

}  // namespace

TEST_SUITE("bench-harness") {

TEST_CASE("scenario loading") {
  const auto sc = testing::base_scenario(testing::scratch("load"));
  CHECK(fs::exists(sc.module_file));
  CHECK(fs::exists(sc.surrogate_file));
  CHECK(sc.problem.n_cell() == 2);
  for (const auto& c : sc.problem.initial) CHECK(c.T == sc.T_amb);
  const auto warm = sc.at_temperature(308.15);
  for (const auto& c : warm.problem.initial) CHECK(c.T == 308.15);

  CHECK(sc.hash() == testing::base_scenario(testing::scratch("other")).hash());
  CHECK(sc.hash() != sc.with_alpha(0.25).hash());
  CHECK(sc.hash() != sc.with_scheme(Scheme::kSCT).hash());

  auto j = base_json();
  j.erase("module");
  CHECK_THROWS_AS(scenario_from_json(j, "."), InvalidScenario);
  j = base_json();
  j["problem"]["weights"]["alpha"] = 2.0;
  CHECK_THROWS_AS(scenario_from_json(j, "."), InvalidScenario);
  j = base_json();
  j["problem"]["initial"][0]["soc"] = 0.95;
  CHECK_THROWS_AS(scenario_from_json(j, "."), InvalidScenario);
}

TEST_CASE("run record json round trip") {
  RunRecord r;
  r.hash = "abc";
  r.scheme = "DCT";
  r.T_amb = 298.15;
  r.alpha = 0.5;
  r.status = SolverStatus::kOptimal;
  r.iterations = 17;
  r.t_f = {320.0, 250.0};
  r.dL_pct = {3.7, 3.2};
  r.dQ_pct = {0.01, 0.008};
  r.cost.J = 5000.0;
  r.certified = true;
  r.gap = {1e-7, 2e-7};
  const auto back = RunRecord::from_json(r.to_json());
  CHECK(back.to_json() == r.to_json());
  CHECK(back.max_tf() == 320.0);
  CHECK(back.mean_tf() == 285.0);
}

TEST_CASE("DCT run persists and orders the final times") {
  const auto out = testing::scratch("dct");
  const auto sc = testing::base_scenario(out);
  const auto dct = run_scenario(sc);
  REQUIRE(dct.optimal());
  CHECK(dct.certified);
  CHECK(dct.t_f[1] < dct.t_f[0]);
  CHECK(dct.gap.soc_abs < 1e-3);
  CHECK(dct.gap.L_rel < 5e-3);
  for (const char* f : {"scenario.json", "solution.json", "trajectory.csv", "iterations.csv", "certificate.json"}) {
    CHECK(fs::exists(out / f));
  }
  CHECK(first_line(out / "trajectory.csv").rfind("t,I0,", 0) == 0);
  // The persisted scenario reproduces the hash.
  CHECK(load_scenario(out / "scenario.json").hash() == dct.hash);

  auto ssc = sc.with_scheme(Scheme::kSCT);
  ssc.out = testing::scratch("sct");
  const auto sct = run_scenario(ssc);
  REQUIRE(sct.optimal());
  CHECK(dct.cost.J <= sct.cost.J * (1 + 1e-9));
  CHECK(sct.t_f[0] == sct.t_f[1]);
}

TEST_CASE("symmetric scenario and the degenerate robustness study") {
  auto sc = testing::base_scenario(testing::scratch("sym"));
  sc.problem.scheme = Scheme::kSCT;
  for (auto& c : sc.problem.initial) c.soc = 0.3;
  const auto r = run_scenario(sc);
  REQUIRE(r.optimal());
  CHECK(r.dL_pct[0] == doctest::Approx(r.dL_pct[1]).epsilon(1e-6));
  CHECK(r.dQ_pct[0] == doctest::Approx(r.dQ_pct[1]).epsilon(1e-6));
  CHECK(r.soc_end[0] == doctest::Approx(r.soc_end[1]).epsilon(1e-8));

  auto base = testing::base_scenario(testing::scratch("robust1"));
  const auto recs = robustness_study(base, {ImbalanceKind::kSoc, 0.3, 0.3}, 1, {298.15}, 1);
  REQUIRE(recs.size() == 2);
  const auto& s = recs[0].scheme == "SCT" ? recs[0] : recs[1];
  CHECK(s.hash == r.hash);
  CHECK(s.t_f == r.t_f);
  CHECK(s.dL_pct == r.dL_pct);

  // Aggregates recompute from the persisted records.
  std::ifstream in(base.out / "runs.json");
  nlohmann::json all;
  in >> all;
  std::vector<RunRecord> back;
  for (const auto& j : all) back.push_back(RunRecord::from_json(j));
  std::ifstream sin(base.out / "summary.json");
  nlohmann::json summary;
  sin >> summary;
  CHECK(robustness_summary_json(summarize_robustness(back)) == summary);
}

TEST_CASE("duplicated alpha gives identical points") {
  auto base = testing::base_scenario(testing::scratch("pareto"));
  const auto pts = pareto_sweep(base, {0.5, 0.5}, 1);
  REQUIRE(pts.size() == 4);
  CHECK(pts[0].mean_tf == pts[1].mean_tf);
  CHECK(pts[0].max_dL == pts[1].max_dL);
  CHECK(pts[2].max_dL == pts[3].max_dL);
  CHECK(first_line(base.out / "pareto.csv") == "scheme,alpha,mean_t_f_s,max_dL_sei_pct,optimal");
  CHECK_THROWS_AS(pareto_sweep(base, {1.5}, 1), InvalidScenario);
}

TEST_CASE("table layout") {
  RunRecord a;
  a.scheme = "SCT";
  a.t_f = {300, 300};
  a.dL_pct = {4, 3};
  a.dQ_pct = {0.01, 0.009};
  const auto p = testing::scratch("table") / "t.csv";
  fs::create_directories(p.parent_path());
  write_table({a}, p);
  CHECK(first_line(p) == "scheme,dL_sei_1_pct,dL_sei_2_pct,dQ_1_pct,dQ_2_pct,t_f_1_s,t_f_2_s");
}

TEST_CASE("zero cycles lose nothing") {
  auto base = testing::base_scenario(testing::scratch("cycle0"));
  const auto res = cycling_comparison(base, {"3C", "8C", "sct", "dct"}, 0, 0, 1);
  REQUIRE(res.size() == 4);
  for (const auto& r : res) {
    for (double v : r.loss_pct) CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(cycling_comparison(base, {"fast"}, 1, 0, 1), InvalidScenario);
}

TEST_CASE("worker pool") {
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](int i) { hit[i] += 1; });
  for (int h : hit) CHECK(h == 1);
  CHECK_THROWS(parallel_for(5, 2, [](int i) {
    if (i == 3) throw std::runtime_error("boom");
  }));
}

TEST_CASE("command line exit codes") {
  CHECK(run_cli("solve --scenario /nonexistent.json") == 3);
  CHECK(run_cli("solve") == 3);
  CHECK(run_cli("frobnicate") == 3);
  auto j = base_json();
  j["problem"]["weights"]["alpha"] = -1;
  CHECK(run_cli("solve --scenario " + write_scenario("cli_bad", j).string()) == 3);

  j = base_json();
  j["solver"] = {{"max_iter", 2}};
  const auto p = write_scenario("cli_short", j);
  CHECK(run_cli("solve --scenario " + p.string() + " --out " + (p.parent_path() / "run").string()) == 2);
  CHECK(fs::exists(p.parent_path() / "run" / "solution.json"));

  const auto ok = testing::scratch("cli_ok");
  CHECK(run_cli("solve --scenario " + (testing::scenario_dir() / "base.json").string() + " --out " + ok.string()) == 0);
  CHECK(run_cli("certify " + ok.string()) == 0);
}

}  // TEST_SUITE
