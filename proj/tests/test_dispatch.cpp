#include <doctest.h>

#include <chrono>
#include <cmath>

#include "gridcfc/dispatch.hpp"
#include "gridcfc/error.hpp"
#include "test_support.hpp"

using namespace gridcfc;
using namespace gridcfc::test;

namespace {

Topology full_topology(const GridCase& g) {
  return compute_islands(g, std::vector<char>(g.num_branches(), 1));
}

void check_feasible(const GridCase& g, const Topology& topo, int island,
                    const DispatchSolution& sol) {
  REQUIRE(sol.feasible);
  REQUIRE(sol.state.converged());
  CHECK_FALSE(find_violations(g, topo, island, sol.state).any());
  for (size_t k = 0; k < g.generators.size(); ++k) {
    if (!sol.state.gen_on[k] || topo.island_of_bus[g.generators[k].bus] != island) continue;
    CHECK(sol.p_gen[k] <= g.generators[k].p_max + 1e-6);
    CHECK(sol.p_gen[k] >= g.generators[k].p_min - 1e-6);
  }
  for (double r : sol.retained) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
}

}  // namespace

TEST_CASE("an island without violations keeps all load") {
  auto g = buses_only(2);
  g.buses[0].type = BusType::Ref;
  add_branch(g, 0, 1, 0.05, 0.0, 300.0, 450.0);
  add_gen(g, 0, 0.0, 500.0);
  add_load(g, 1, 100.0);
  auto topo = full_topology(g);
  auto s = settle_island(g, topo, 0, initial_state(g));
  auto sol = emergent_dispatch(g, topo, 0, s);
  check_feasible(g, topo, 0, sol);
  CHECK(sol.retained[0] == 1.0);
  CHECK(sol.objective == doctest::Approx(100.0));
}

TEST_CASE("radial overload sheds down to the rating") {
  auto g = buses_only(2);
  g.buses[0].type = BusType::Ref;
  add_branch(g, 0, 1, 0.01, 0.0, 140.0, 210.0);
  add_gen(g, 0, 0.0, 500.0);
  add_load(g, 1, 150.0);
  auto topo = full_topology(g);
  auto s = settle_island(g, topo, 0, initial_state(g));
  REQUIRE(s.branch_flow[0] > 150.0);
  auto sol = emergent_dispatch(g, topo, 0, s);
  check_feasible(g, topo, 0, sol);
  CHECK(sol.retained[0] == doctest::Approx(140.0 / 150.0).epsilon(0.01));
  CHECK(sol.objective == doctest::Approx(140.0).epsilon(0.01));
  CHECK(sol.state.branch_flow[0] <= 140.0 + 1e-3);
}

TEST_CASE("an island without load is trivially feasible") {
  auto g = buses_only(2);
  g.buses[0].type = BusType::Ref;
  add_branch(g, 0, 1, 0.05);
  add_gen(g, 0, 0.0, 500.0);
  auto topo = full_topology(g);
  auto sol = emergent_dispatch(g, topo, 0, settle_island(g, topo, 0, initial_state(g)));
  check_feasible(g, topo, 0, sol);
  CHECK(sol.objective == 0.0);
}

TEST_CASE("redispatch clears an overload without shedding") {
  // Triangle; the cheap-to-reach unit at bus 1 overloads line 1-3, the unit
  // at bus 2 can take over.
  auto g = buses_only(3);
  g.buses[0].type = BusType::Ref;
  add_branch(g, 0, 2, 0.05, 0.0, 80.0, 120.0);
  add_branch(g, 0, 1, 0.05, 0.0, 500.0, 750.0);
  add_branch(g, 1, 2, 0.05, 0.0, 500.0, 750.0);
  add_gen(g, 0, 150.0, 300.0);
  add_gen(g, 1, 0.0, 300.0);
  g.generators[0].slack_coeff = 1.0;
  g.generators[1].slack_coeff = 0.0;
  add_load(g, 2, 150.0);
  auto topo = full_topology(g);
  auto s = settle_island(g, topo, 0, initial_state(g));
  REQUIRE(s.branch_flow[0] > 80.0);
  auto sol = emergent_dispatch(g, topo, 0, s);
  check_feasible(g, topo, 0, sol);
  CHECK(sol.retained[0] == doctest::Approx(1.0));
  CHECK(sol.p_gen[1] > 10.0);
}

TEST_CASE("undervoltage is relieved by shedding") {
  auto g = buses_only(2);
  g.buses[0].type = BusType::Ref;
  add_branch(g, 0, 1, 0.2, 0.02, 900.0, 1350.0);
  add_gen(g, 0, 0.0, 500.0);
  add_load(g, 1, 80.0, 60.0);
  auto topo = full_topology(g);
  auto s = settle_island(g, topo, 0, initial_state(g));
  REQUIRE(s.converged());
  REQUIRE(s.v_mag[1] < 0.9);
  auto sol = emergent_dispatch(g, topo, 0, s);
  check_feasible(g, topo, 0, sol);
  CHECK(sol.retained[0] < 1.0);
  CHECK(sol.state.v_mag[1] >= 0.9 - 1e-6);
  CHECK(sol.state.v_mag[1] < 0.91);
}

TEST_CASE("stressed 118-bus contingencies end clean or blacked out") {
  auto g = ieee118_stressed();
  auto base_topo = full_topology(g);
  auto settled = settle_island(g, base_topo, 0, initial_state(g));
  REQUIRE(settled.converged());
  CHECK(find_violations(g, base_topo, 0, settled).any());
  auto secured = emergent_dispatch(g, base_topo, 0, settled);
  REQUIRE(secured.feasible);
  check_feasible(g, base_topo, 0, secured);
  CHECK(secured.objective > 0.95 * island_served_mw(g, base_topo, 0, settled));
  const auto base = secured.state;
  int dispatched = 0;
  double worst_ms = 0.0;
  for (auto [a, b] : {std::pair{6, 7}, {35, 36}, {7, 8}, {90, 91}, {50, 55}, {3, 100}}) {
    std::vector<char> mask(g.num_branches(), 1);
    mask[a] = mask[b] = 0;
    auto topo = compute_islands(g, mask, &base_topo);
    SystemState s = base;
    for (const auto& isl : topo.islands) {
      s = settle_island(g, topo, isl.id, s);
      const double before = island_served_mw(g, topo, isl.id, s);
      const auto t0 = std::chrono::steady_clock::now();
      auto sol = emergent_dispatch(g, topo, isl.id, s);
      worst_ms = std::max(worst_ms, std::chrono::duration<double, std::milli>(
                                        std::chrono::steady_clock::now() - t0)
                                        .count());
      CHECK(sol.objective <= before + 1e-6);
      if (sol.feasible) {
        check_feasible(g, topo, isl.id, sol);
      } else {
        CHECK(sol.objective == 0.0);
      }
      dispatched += sol.iterations > 0;
      s = sol.state;
    }
  }
  MESSAGE("dispatch runs with LP steps: " << dispatched << ", slowest " << worst_ms << " ms");
}

TEST_CASE("dispatch needs a converged state") {
  auto g = path4();
  auto topo = full_topology(g);
  auto s = initial_state(g);
  s.status = SolveStatus::Diverged;
  CHECK_THROWS_AS(emergent_dispatch(g, topo, 0, s), Error);
}

#include "dispatch_model.hpp"

TEST_CASE("dispatch sensitivities match finite differences") {
  auto g = ieee118_stressed();
  auto topo = full_topology(g);
  auto s0 = settle_island(g, topo, 0, initial_state(g));
  REQUIRE(s0.converged());
  PowerFlowOptions keep;
  keep.enforce_q_limits = false;
  detail::SolvedIsland layout;
  auto s = detail::solve_island(g, topo, 0, targets_from(s0), s0, keep, &layout);
  REQUIRE(s.converged());

  int regulated = -1;
  for (int k = 0; k < static_cast<int>(layout.pq.size()); ++k)
    if (!layout.pq[k] && k != layout.ref) {
      regulated = layout.net.buses[k];
      break;
    }
  REQUIRE(regulated >= 0);
  int movable = -1;
  for (int k = 0; k < static_cast<int>(g.generators.size()); ++k)
    if (s.p_gen[k] < g.generators[k].p_max - 5.0 && s.p_gen[k] > g.generators[k].p_min + 5.0) {
      movable = k;
      break;
    }
  REQUIRE(movable >= 0);

  for (int which = 0; which < 3; ++which) {
    detail::Perturbation dp;
    dp.d_retained.assign(g.loads.size(), 0.0);
    dp.d_pset.assign(g.generators.size(), 0.0);
    dp.d_vset.assign(g.num_buses(), 0.0);
    auto targets = targets_from(s);
    if (which == 0) {
      dp.d_pset[movable] = 2.0;
    } else if (which == 1) {
      dp.d_retained[20] = -0.02;
    } else {
      dp.d_vset[regulated] = 0.0005;
    }
    for (size_t d = 0; d < g.loads.size(); ++d) targets.retained[d] += dp.d_retained[d];
    for (size_t k = 0; k < g.generators.size(); ++k) targets.p_gen[k] += dp.d_pset[k];
    targets.v_set[regulated] += dp.d_vset[regulated];
    detail::SolvedIsland after_layout;
    auto after = detail::solve_island(g, topo, 0, targets, s, keep, &after_layout);
    REQUIRE(after.converged());
    REQUIRE(after_layout.pq == layout.pq);
    detail::Prediction pred;
    REQUIRE(detail::predict(g, layout, s, dp, pred));
    double worst_flow = 0.0, worst_v = 0.0, worst_p = 0.0, moved = 0.0;
    for (int l = 0; l < g.num_branches(); ++l) {
      worst_flow = std::max(worst_flow, std::abs(pred.branch_flow[l] - after.branch_flow[l]));
      moved = std::max(moved, std::abs(after.branch_flow[l] - s.branch_flow[l]));
    }
    for (int b = 0; b < g.num_buses(); ++b)
      worst_v = std::max(worst_v, std::abs(pred.v_mag[b] - after.v_mag[b]));
    for (size_t k = 0; k < g.generators.size(); ++k)
      worst_p = std::max(worst_p, std::abs(pred.p_gen[k] - after.p_gen[k]));
    CAPTURE(which);
    CAPTURE(moved);
    CHECK(moved > 0.01);
    CHECK(worst_flow < 0.02 * moved + 1e-4);
    CHECK(worst_v < 1e-5);
    CHECK(worst_p < 1e-2);
  }
}
