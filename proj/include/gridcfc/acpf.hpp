#pragma once

#include <iosfwd>
#include <vector>

#include "gridcfc/grid_model.hpp"

namespace gridcfc {

enum class SolveStatus { Converged, Diverged, Singular, Unbalanced };

// Electrical state of the whole grid. Island operations only rewrite the
// entries belonging to the island they are given.
struct SystemState {
  int island = 0;
  std::vector<double> v_mag;          // per bus, p.u. (0 for de-energized buses)
  std::vector<double> v_ang;          // per bus, rad
  std::vector<double> p_gen;          // per generator, MW
  std::vector<double> q_gen;          // per generator, MVAr
  std::vector<double> p_set;          // per generator, MW before loss pickup
  std::vector<double> v_set;          // per bus, regulated voltage set-point (0 if unregulated)
  std::vector<char> gen_on;           // per generator
  std::vector<double> shed_fraction;  // per load, relative to the case load
  std::vector<double> branch_flow;    // per branch, MVA at the more loaded end
  double p_loss = 0.0;                // MW, island
  SolveStatus status = SolveStatus::Converged;
  int iterations = 0;
  double max_mismatch = 0.0;  // p.u.
  bool collapsed = false;     // produced by the shedding fallback of settle_island

  bool converged() const { return status == SolveStatus::Converged; }
};

// Pre-contingency state straight from the case data, flat voltages.
SystemState initial_state(const GridCase& grid);

// Generator set-points and load retention handed to the solver.
struct DispatchTargets {
  std::vector<double> p_gen;     // MW
  std::vector<char> gen_on;
  std::vector<double> retained;  // per load, 1 - shed_fraction
  std::vector<double> v_set;     // per bus; empty or 0 falls back to the case set-point
};

DispatchTargets targets_from(const SystemState& state);

// Matches island generation to island demand before a solve: ramps units in
// proportion to headroom, sheds uniformly on a capacity shortfall, trips units
// in ascending p_min order when minimum output exceeds demand, and blacks out
// islands without generation.
DispatchTargets rebalance_island(const GridCase& grid, const Topology& topo, int island,
                                 const SystemState& prior);

struct PowerFlowOptions {
  double tolerance = 1e-8;  // max mismatch, p.u.
  int max_iterations = 30;  // per Newton run
  bool enforce_q_limits = true;
  bool enforce_p_limits = true;
  bool single_slack = false;  // only the reference bus picks up losses
  bool warm_start = true;
  int max_outer_loops = 20;   // clipping / PV-PQ switching passes
  std::ostream* trace = nullptr;
};

// Reference (angle) bus of an island: the case's designated reference bus when
// it lies in the island with a running unit, else the bus with the largest
// running p_max (lowest position on ties). -1 if the island has no running unit.
int island_reference_bus(const GridCase& grid, const Topology& topo, int island,
                         const std::vector<char>& gen_on);

// Newton-Raphson AC power flow for one island with losses shared across
// running units by r_g (renormalized over unclipped units). `prior` supplies
// the warm start and every entry outside the island.
SystemState solve_power_flow(const GridCase& grid, const Topology& topo, int island,
                             const DispatchTargets& targets, const SystemState& prior,
                             const PowerFlowOptions& opts = {});

// Uniform 5% shedding steps until the island solves; full blackout otherwise.
SystemState collapse_fallback(const GridCase& grid, const Topology& topo, int island,
                              const DispatchTargets& targets, const SystemState& prior,
                              const PowerFlowOptions& opts = {});

// rebalance + solve, with the fallback on divergence.
SystemState settle_island(const GridCase& grid, const Topology& topo, int island,
                          const SystemState& prior, const PowerFlowOptions& opts = {});

// Blackout of an island: every load shed, every unit off, buses de-energized.
SystemState blackout_island(const GridCase& grid, const Topology& topo, int island,
                            const SystemState& prior);

// Served MW of the loads located in an island.
double island_served_mw(const GridCase& grid, const Topology& topo, int island,
                        const SystemState& state);

}  // namespace gridcfc
