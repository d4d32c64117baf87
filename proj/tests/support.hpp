#pragma once

#include <filesystem>
#include <string>

#include "bmsopt/harness.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return BMSOPT_DATA_DIR; }
inline std::filesystem::path scenario_dir() { return BMSOPT_SCENARIO_DIR; }

inline const bmsopt::CellParameters& cell() {
  static const auto c = bmsopt::load_cell(data_dir() / "cell_nmc_graphite.json");
  return c;
}

inline const bmsopt::SurrogateModel& surrogate() {
  static const auto s = bmsopt::SurrogateModel::load(data_dir() / "surrogate_nmc_graphite.json");
  return s;
}

/// Two copies of the shipped cell with the shipped surrogate.
inline bmsopt::ModuleParameters module(int n_cell = 2, double T_amb = 298.15) {
  bmsopt::ModuleParameters mp;
  mp.cells.assign(n_cell, cell());
  mp.T_amb = T_amb;
  mp.solvent.models = {surrogate()};
  return mp;
}

inline bmsopt::Scenario base_scenario(const std::filesystem::path& out) {
  auto sc = bmsopt::load_scenario(scenario_dir() / "base.json");
  sc.out = out;
  return sc;
}

inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("bmsopt_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace testing
