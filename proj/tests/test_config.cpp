#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gridcfc/config.hpp"
#include "gridcfc/error.hpp"
#include "test_support.hpp"

using namespace gridcfc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string error_text(const json& j) {
  try {
    (void)config_from_json(j);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults survive a JSON round trip") {
  const ExperimentConfig c;
  const auto j = config_to_json(c);
  CHECK(config_to_json(config_from_json(j)) == j);
  CHECK(j["interaction"]["k1"] == 6.0);
  CHECK(j["interaction"]["k2"] == 3.0);
  CHECK(j["ranking"]["tol"] == 1e-5);
  CHECK(j["validation"]["delta_c_mw"] == 300.0);
  CHECK(j["validation"]["sizes"] == json({0, 2, 4, 6, 8, 10, 12}));
  CHECK(config_from_json(json::object()).simulation.n_samples == c.simulation.n_samples);
}

TEST_CASE("every problem is reported at once") {
  const json bad = {{"simulation", {{"n_sample", 10}, {"workers", 0}}},
                    {"ranking", {{"tol", "small"}}},
                    {"interaction", {{"k2", -1.0}}},
                    {"extra", {}}};
  const auto text = error_text(bad);
  CHECK(text.find("unknown key simulation.n_sample") != std::string::npos);
  CHECK(text.find("simulation.workers") != std::string::npos);
  CHECK(text.find("ranking.tol has the wrong type") != std::string::npos);
  CHECK(text.find("k2") != std::string::npos);
  CHECK(text.find("extra") != std::string::npos);
  CHECK(error_text({{"simulation", {{"initial_policy", "n3"}}}}).find("initial_policy") !=
        std::string::npos);
  CHECK(error_text({{"validation", {{"sizes", {4, 2}}}}}).find("ascending") != std::string::npos);
}

TEST_CASE("environment overrides") {
  const json base = config_to_json(ExperimentConfig{});
  const auto j = apply_env_overrides(base, {{"GRIDCFC_SIMULATION_N_SAMPLES", "123"},
                                            {"GRIDCFC_CASE_PATH", "grids/x.m"},
                                            {"GRIDCFC_INTERACTION_LOSS_INCLUDES_OWN_STAGE", "false"},
                                            {"OTHER_VALUE", "1"}});
  const auto c = config_from_json(j);
  CHECK(c.simulation.n_samples == 123);
  CHECK(c.grid.path == "grids/x.m");
  CHECK_FALSE(c.interaction.loss_includes_own_stage);
  CHECK_THROWS_AS(apply_env_overrides(base, {{"GRIDCFC_SAMPLES", "1"}}), Error);
  CHECK_THROWS_AS(config_from_json(apply_env_overrides(base, {{"GRIDCFC_SIMULATION_SAMPLES", "1"}})),
                  Error);
}

TEST_CASE("shipped experiment config builds the stressed case") {
  const auto c = load_config(fs::path(GRIDCFC_DATA_DIR) / "../configs/ieee118_experiment.json", false);
  CHECK(fs::path(c.grid.path).is_absolute());
  CHECK(fs::exists(c.grid.path));
  CHECK(c.simulation.n_samples == 20000);
  const auto g = build_case(c.grid);
  CHECK(g.num_branches() == 186);
  double load = 0.0;
  for (const auto& d : g.loads) load += d.p;
  CHECK(load == doctest::Approx(3733.0 * 1.6).epsilon(1e-9));
  const auto ref = test::ieee118_stressed();
  for (int l = 0; l < g.num_branches(); ++l) {
    CHECK(g.branches[l].f_lim1 == ref.branches[l].f_lim1);
    CHECK(g.branches[l].f_lim2 == ref.branches[l].f_lim2);
  }
}

TEST_CASE("relative case paths follow the config file") {
  const auto dir = fs::temp_directory_path() / "gridcfc_test_config";
  fs::create_directories(dir / "grids");
  fs::copy_file(fs::path(GRIDCFC_DATA_DIR) / "case118.m", dir / "grids" / "c.m",
                fs::copy_options::overwrite_existing);
  std::ofstream(dir / "exp.json") << R"({"case": {"path": "grids/c.m"}, "simulation": {"n_samples": 7}})";
  const auto c = load_config(dir / "exp.json", false);
  CHECK(fs::equivalent(c.grid.path, dir / "grids" / "c.m"));
  CHECK(c.simulation.n_samples == 7);
  CHECK(build_case(c.grid).num_buses() == 118);
  std::ofstream(dir / "broken.json") << "{ nope";
  CHECK_THROWS_AS(load_config(dir / "broken.json", false), Error);
  CHECK_THROWS_AS(load_config(dir / "absent.json", false), Error);
}
