#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcfc/cascade.hpp"
#include "gridcfc/grid_model.hpp"
#include "gridcfc/interaction.hpp"
#include "gridcfc/ranking.hpp"
#include "gridcfc/structural.hpp"

namespace gridcfc {

struct CaseSettings {
  std::string path;  // relative paths resolve against the config file
  CaseFormat format = CaseFormat::Auto;
  std::optional<double> base_total_load_mw;
  double load_factor = 1.0;
  std::optional<double> line_limit_mw;
  std::optional<double> xfmr_limit_mw;
  double f_lim2_ratio = 1.5;
  double hidden_failure_prob = 0.01;
  std::optional<double> v_min;
  std::optional<double> v_max;
};

struct ValidationSettings {
  double delta_c_mw = 300.0;
  std::vector<int> sizes{0, 2, 4, 6, 8, 10, 12};
  int middle_start = 15;
};

struct ExperimentConfig {
  CaseSettings grid;
  SimulationConfig simulation;
  InteractionParams interaction;
  double export_threshold = 0.0;
  HitsOptions hits;
  double regularize_floor = 0.0;  // <= 0: relative default
  StructuralOptions structural;
  ValidationSettings validation;
};

// Unknown keys are rejected so typos do not silently fall back to defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

// GRIDCFC_<SECTION>_<KEY>=value overrides (value parsed as JSON when it is
// valid JSON, otherwise taken as a string), e.g. GRIDCFC_SIMULATION_N_SAMPLES=100.
nlohmann::json apply_env_overrides(nlohmann::json j, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> gridcfc_environment();

// Reads the file, applies environment overrides and resolves the case path.
ExperimentConfig load_config(const std::filesystem::path& path, bool use_env = true);

// Loads and scales the case described by the settings.
GridCase build_case(const CaseSettings& s);

}  // namespace gridcfc
