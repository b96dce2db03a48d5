#pragma once

// Linear model used by the dispatch, exposed for verification.

#include <vector>

#include "ac_network.hpp"

namespace gridcfc::detail {

struct Perturbation {
  std::vector<double> d_retained;  // per load
  std::vector<double> d_pset;      // per generator, MW
  std::vector<double> d_vset;      // per bus, regulated buses only
};

struct Prediction {
  std::vector<double> branch_flow;  // per branch, MVA at the more loaded end
  std::vector<double> v_mag;        // per bus
  std::vector<double> p_gen;        // per generator
};

// First-order prediction of an island's state after a perturbation of its
// converged solution `state` (solved with layout `solved`).
bool predict(const GridCase& grid, const SolvedIsland& solved, const SystemState& state,
             const Perturbation& dp, Prediction& out);

}  // namespace gridcfc::detail
