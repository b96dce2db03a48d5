#pragma once

#include <vector>

#include "gridcfc/acpf.hpp"
#include "gridcfc/grid_model.hpp"

namespace gridcfc {

struct Violations {
  std::vector<int> branches;  // flow above f_lim1
  std::vector<int> buses;     // voltage outside [v_min, v_max]
  bool any() const { return !branches.empty() || !buses.empty(); }
};

// Limit violations of an island's converged state.
Violations find_violations(const GridCase& grid, const Topology& topo, int island,
                           const SystemState& state, double flow_tol_mw = 1e-3,
                           double voltage_tol = 1e-6);

struct DispatchOptions {
  int max_iterations = 60;  // linear programs solved
  double restore_tol_mw = 0.5;  // stop restoring load below this predicted gain
  double output_screen_mw = 5.0;  // units this close to a limit get an output row from the start
  double damping = 0.7;     // trust-region shrink factor on a rejected step
  double trust_mw = 50.0;   // initial per-unit step bound
  double trust_mw_max = 1000.0;
  double trust_load = 0.25;  // initial per-load step bound on k_d
  double trust_volt = 0.005;  // initial set-point step bound, p.u.
  double flow_tol_mw = 1e-3;
  double voltage_tol = 1e-6;
  // Only branches loaded above this share of f_lim1 (and buses within
  // voltage_screen of a bound) enter the linear program from the start.
  double flow_screen = 0.9;
  double voltage_screen = 0.02;
  double flow_margin_mw = 0.01;
  double voltage_margin = 1e-4;
  int bisection_steps = 12;
  PowerFlowOptions power_flow;
};

struct DispatchSolution {
  std::vector<double> retained;  // per load, k_d
  std::vector<double> p_gen;     // per generator, MW
  std::vector<double> q_gen;     // per generator, MVAr
  std::vector<double> v_mag;     // per bus
  double objective = 0.0;        // MW served in the island
  bool feasible = false;
  int iterations = 0;
  SystemState state;  // verified AC state of the returned dispatch
};

// Maximizes served island load subject to flow, voltage and generator limits
// by successive linear programming on AC sensitivities. Served load never
// increases. When no dispatch clears the violations the island is blacked out
// and the solution is flagged infeasible.
DispatchSolution emergent_dispatch(const GridCase& grid, const Topology& topo, int island,
                                   const SystemState& state, const DispatchOptions& opts = {});

}  // namespace gridcfc
