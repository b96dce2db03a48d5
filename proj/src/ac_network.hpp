#pragma once

// Internal helpers shared by the power flow, dispatch and structural code.

#include <complex>
#include <vector>

#include <Eigen/Sparse>

#include "gridcfc/acpf.hpp"
#include "gridcfc/grid_model.hpp"

namespace gridcfc::detail {

using cd = std::complex<double>;

struct BranchAdmittance {
  cd yff, yft, ytf, ytt;
};

BranchAdmittance branch_admittance(const Branch& br);

// Buses, in-service branches, running units and loads of one island, with a
// global-to-local bus map.
struct IslandNet {
  std::vector<int> buses;
  std::vector<int> local;  // size num_buses, -1 outside the island
  std::vector<int> branches;
  std::vector<int> gens;
  std::vector<int> loads;
};

IslandNet gather_island(const GridCase& grid, const Topology& topo, int island,
                        const std::vector<char>& gen_on);

Eigen::SparseMatrix<cd> make_ybus(const GridCase& grid, const IslandNet& net);

// Complex power entering the branch at each end, p.u.
struct EndFlows {
  cd from, to;
};
EndFlows branch_end_flows(const Branch& br, cd v_from, cd v_to);

// Unknown/equation numbering of the Newton system: angles of non-reference
// buses, magnitudes of PQ buses, then the shared slack. Rows are P balance of
// every bus followed by Q balance of PQ buses.
struct JacobianIndex {
  std::vector<int> th_col, vm_col, q_row;
  int lam_col = 0;
  int rows = 0;
  int cols = 0;
};

JacobianIndex index_unknowns(int ref, const std::vector<char>& pq);

// Bus current injections I = Y V.
std::vector<cd> bus_currents(const Eigen::SparseMatrix<cd>& ybus, const std::vector<cd>& v);

Eigen::SparseMatrix<double> assemble_jacobian(const Eigen::SparseMatrix<cd>& ybus,
                                              const std::vector<cd>& v,
                                              const std::vector<cd>& current,
                                              const JacobianIndex& idx,
                                              const std::vector<double>& slack_share);

// Everything a caller needs to linearize a converged island solution.
struct SolvedIsland {
  IslandNet net;
  Eigen::SparseMatrix<cd> ybus;
  int ref = 0;                      // local
  std::vector<char> pq;             // per local bus, final PV/PQ status
  std::vector<double> slack_share;  // per local bus
  std::vector<double> gen_weight;   // per generator, normalized r_g
  std::vector<double> load_p;       // per local bus, MW served
  std::vector<double> load_q;
};

SystemState solve_island(const GridCase& grid, const Topology& topo, int island,
                         const DispatchTargets& targets, const SystemState& prior,
                         const PowerFlowOptions& opts, SolvedIsland* solved);

}  // namespace gridcfc::detail
