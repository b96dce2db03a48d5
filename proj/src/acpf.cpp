#include "gridcfc/acpf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <Eigen/SparseLU>

#include "ac_network.hpp"
#include "gridcfc/error.hpp"

namespace gridcfc {

namespace detail {

BranchAdmittance branch_admittance(const Branch& br) {
  const cd ys = 1.0 / cd(br.r, br.x);
  const cd charge(0.0, br.b_shunt / 2.0);
  const double shift = br.shift_deg * std::numbers::pi / 180.0;
  const cd tap = std::polar(br.tap, shift);
  BranchAdmittance y;
  y.ytt = ys + charge;
  y.yff = y.ytt / (br.tap * br.tap);
  y.yft = -ys / std::conj(tap);
  y.ytf = -ys / tap;
  return y;
}

IslandNet gather_island(const GridCase& grid, const Topology& topo, int island,
                        const std::vector<char>& gen_on) {
  IslandNet net;
  net.buses = topo.island(island).buses;
  net.local.assign(grid.num_buses(), -1);
  for (size_t k = 0; k < net.buses.size(); ++k) net.local[net.buses[k]] = static_cast<int>(k);
  for (int l = 0; l < grid.num_branches(); ++l)
    if (topo.in_service[l] && net.local[grid.branches[l].from] >= 0) net.branches.push_back(l);
  for (int g = 0; g < static_cast<int>(grid.generators.size()); ++g)
    if (gen_on[g] && net.local[grid.generators[g].bus] >= 0) net.gens.push_back(g);
  for (int d = 0; d < static_cast<int>(grid.loads.size()); ++d)
    if (net.local[grid.loads[d].bus] >= 0) net.loads.push_back(d);
  return net;
}

Eigen::SparseMatrix<cd> make_ybus(const GridCase& grid, const IslandNet& net) {
  const int n = static_cast<int>(net.buses.size());
  std::vector<Eigen::Triplet<cd>> trip;
  trip.reserve(n + 4 * net.branches.size());
  for (int k = 0; k < n; ++k) {
    const auto& b = grid.buses[net.buses[k]];
    trip.emplace_back(k, k, cd(b.gs, b.bs) / grid.base_mva);
  }
  for (int l : net.branches) {
    const auto& br = grid.branches[l];
    const auto y = branch_admittance(br);
    const int f = net.local[br.from], t = net.local[br.to];
    trip.emplace_back(f, f, y.yff);
    trip.emplace_back(f, t, y.yft);
    trip.emplace_back(t, f, y.ytf);
    trip.emplace_back(t, t, y.ytt);
  }
  Eigen::SparseMatrix<cd> ybus(n, n);
  ybus.setFromTriplets(trip.begin(), trip.end());
  return ybus;
}

EndFlows branch_end_flows(const Branch& br, cd vf, cd vt) {
  const auto y = branch_admittance(br);
  return {vf * std::conj(y.yff * vf + y.yft * vt), vt * std::conj(y.ytf * vf + y.ytt * vt)};
}

JacobianIndex index_unknowns(int ref, const std::vector<char>& pq) {
  const int n = static_cast<int>(pq.size());
  JacobianIndex idx;
  idx.th_col.assign(n, -1);
  idx.vm_col.assign(n, -1);
  idx.q_row.assign(n, -1);
  int cols = 0;
  for (int k = 0; k < n; ++k)
    if (k != ref) idx.th_col[k] = cols++;
  int rows = n;
  for (int k = 0; k < n; ++k)
    if (pq[k]) {
      idx.vm_col[k] = cols++;
      idx.q_row[k] = rows++;
    }
  idx.lam_col = cols++;
  idx.rows = rows;
  idx.cols = cols;
  return idx;
}

std::vector<cd> bus_currents(const Eigen::SparseMatrix<cd>& ybus, const std::vector<cd>& v) {
  std::vector<cd> current(v.size(), cd(0.0));
  for (int c = 0; c < ybus.outerSize(); ++c)
    for (Eigen::SparseMatrix<cd>::InnerIterator e(ybus, c); e; ++e)
      current[e.row()] += e.value() * v[c];
  return current;
}

Eigen::SparseMatrix<double> assemble_jacobian(const Eigen::SparseMatrix<cd>& ybus,
                                              const std::vector<cd>& v,
                                              const std::vector<cd>& current,
                                              const JacobianIndex& idx,
                                              const std::vector<double>& slack_share) {
  const int n = static_cast<int>(v.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * ybus.nonZeros() + 4 * n);
  auto put = [&](int k, int col_th, int col_vm, cd d_th, cd d_vm) {
    if (col_th >= 0) {
      trip.emplace_back(k, col_th, d_th.real());
      if (idx.q_row[k] >= 0) trip.emplace_back(idx.q_row[k], col_th, d_th.imag());
    }
    if (col_vm >= 0) {
      trip.emplace_back(k, col_vm, d_vm.real());
      if (idx.q_row[k] >= 0) trip.emplace_back(idx.q_row[k], col_vm, d_vm.imag());
    }
  };
  const cd j(0.0, 1.0);
  for (int c = 0; c < ybus.outerSize(); ++c)
    for (Eigen::SparseMatrix<cd>::InnerIterator e(ybus, c); e; ++e) {
      const int i = static_cast<int>(e.row());
      const cd yv = e.value() * v[c];
      put(i, idx.th_col[c], idx.vm_col[c], -j * v[i] * std::conj(yv),
          v[i] * std::conj(yv / std::abs(v[c])));
    }
  for (int i = 0; i < n; ++i) {
    put(i, idx.th_col[i], idx.vm_col[i], j * v[i] * std::conj(current[i]),
        std::conj(current[i]) * v[i] / std::abs(v[i]));
    if (slack_share[i] != 0.0) trip.emplace_back(i, idx.lam_col, -slack_share[i]);
  }
  Eigen::SparseMatrix<double> jac(idx.rows, idx.cols);
  jac.setFromTriplets(trip.begin(), trip.end());
  return jac;
}

}  // namespace detail

using detail::cd;

SystemState initial_state(const GridCase& grid) {
  SystemState s;
  s.v_mag.assign(grid.num_buses(), 1.0);
  s.v_ang.assign(grid.num_buses(), 0.0);
  const size_t ng = grid.generators.size();
  s.p_gen.resize(ng);
  s.q_gen.resize(ng);
  s.p_set.resize(ng);
  for (size_t g = 0; g < ng; ++g) {
    s.p_gen[g] = s.p_set[g] = grid.generators[g].p;
    s.q_gen[g] = grid.generators[g].q;
  }
  s.gen_on.assign(ng, 1);
  s.v_set.assign(grid.num_buses(), 0.0);
  for (size_t g = ng; g-- > 0;) s.v_set[grid.generators[g].bus] = grid.generators[g].v_set;
  s.shed_fraction.assign(grid.loads.size(), 0.0);
  s.branch_flow.assign(grid.num_branches(), 0.0);
  return s;
}

DispatchTargets targets_from(const SystemState& state) {
  DispatchTargets t;
  t.p_gen = state.p_set;
  t.gen_on = state.gen_on;
  t.v_set = state.v_set;
  t.retained.resize(state.shed_fraction.size());
  for (size_t d = 0; d < t.retained.size(); ++d) t.retained[d] = 1.0 - state.shed_fraction[d];
  return t;
}

double island_served_mw(const GridCase& grid, const Topology& topo, int island,
                        const SystemState& state) {
  double served = 0.0;
  for (size_t d = 0; d < grid.loads.size(); ++d)
    if (topo.island_of_bus[grid.loads[d].bus] == island)
      served += grid.loads[d].p * (1.0 - state.shed_fraction[d]);
  return served;
}

DispatchTargets rebalance_island(const GridCase& grid, const Topology& topo, int island,
                                 const SystemState& prior) {
  DispatchTargets t = targets_from(prior);
  const auto net = detail::gather_island(grid, topo, island, t.gen_on);

  auto shed_all = [&] {
    for (int d : net.loads) t.retained[d] = 0.0;
    for (int g : net.gens) {
      t.gen_on[g] = 0;
      t.p_gen[g] = 0.0;
    }
  };

  double demand = 0.0;
  for (int d : net.loads) demand += grid.loads[d].p * t.retained[d];

  std::vector<int> running = net.gens;
  // Minimum output above demand: trip units, smallest p_min first.
  std::stable_sort(running.begin(), running.end(), [&](int a, int b) {
    return grid.generators[a].p_min < grid.generators[b].p_min;
  });
  auto sum_pmin = [&] {
    double s = 0.0;
    for (int g : running) s += grid.generators[g].p_min;
    return s;
  };
  while (!running.empty() && sum_pmin() > demand) {
    t.gen_on[running.front()] = 0;
    t.p_gen[running.front()] = 0.0;
    running.erase(running.begin());
  }
  double capacity = 0.0;
  for (int g : running) capacity += grid.generators[g].p_max;
  if (running.empty() || (capacity <= 0.0 && demand > 0.0)) {
    shed_all();
    return t;
  }
  if (capacity < demand) {
    const double keep = capacity / demand;
    for (int d : net.loads) t.retained[d] *= keep;
    demand = capacity;
  }

  double supplied = 0.0;
  for (int g : running) {
    const auto& gen = grid.generators[g];
    t.p_gen[g] = std::clamp(t.p_gen[g], gen.p_min, gen.p_max);
    supplied += t.p_gen[g];
  }
  const double delta = demand - supplied;
  double room = 0.0;
  for (int g : running) {
    const auto& gen = grid.generators[g];
    room += delta > 0.0 ? gen.p_max - t.p_gen[g] : t.p_gen[g] - gen.p_min;
  }
  if (delta != 0.0 && room > 0.0) {
    for (int g : running) {
      const auto& gen = grid.generators[g];
      const double share = (delta > 0.0 ? gen.p_max - t.p_gen[g] : t.p_gen[g] - gen.p_min) / room;
      t.p_gen[g] = std::clamp(t.p_gen[g] + delta * share, gen.p_min, gen.p_max);
    }
  }
  return t;
}

int island_reference_bus(const GridCase& grid, const Topology& topo, int island,
                         const std::vector<char>& gen_on) {
  std::vector<double> pmax(grid.num_buses(), -1.0);
  int best = -1;
  for (size_t g = 0; g < grid.generators.size(); ++g) {
    const auto& gen = grid.generators[g];
    if (!gen_on[g] || topo.island_of_bus[gen.bus] != island) continue;
    pmax[gen.bus] = std::max(pmax[gen.bus], 0.0) + gen.p_max;
  }
  for (int b = 0; b < grid.num_buses(); ++b) {
    if (pmax[b] < 0.0) continue;
    if (grid.buses[b].type == BusType::Ref) return b;
    if (best < 0 || pmax[b] > pmax[best]) best = b;
  }
  return best;
}

SystemState blackout_island(const GridCase& grid, const Topology& topo, int island,
                            const SystemState& prior) {
  SystemState s = prior;
  s.island = island;
  for (int b : topo.island(island).buses) {
    s.v_mag[b] = 0.0;
    s.v_ang[b] = 0.0;
  }
  for (size_t g = 0; g < grid.generators.size(); ++g)
    if (topo.island_of_bus[grid.generators[g].bus] == island) {
      s.gen_on[g] = 0;
      s.p_gen[g] = s.q_gen[g] = s.p_set[g] = 0.0;
    }
  for (size_t d = 0; d < grid.loads.size(); ++d)
    if (topo.island_of_bus[grid.loads[d].bus] == island) s.shed_fraction[d] = 1.0;
  for (int l = 0; l < grid.num_branches(); ++l)
    if (topo.island_of_bus[grid.branches[l].from] == island) s.branch_flow[l] = 0.0;
  s.p_loss = 0.0;
  s.status = SolveStatus::Converged;
  s.iterations = 0;
  s.max_mismatch = 0.0;
  return s;
}

namespace {

struct NewtonProblem {
  const Eigen::SparseMatrix<cd>* ybus = nullptr;
  int ref = 0;                       // local reference bus
  std::vector<char> pq;              // per local bus
  std::vector<double> p_spec;        // p.u., before the slack term
  std::vector<double> q_spec;        // p.u., PQ buses only
  std::vector<double> slack_share;   // per local bus, sums to 1
};

// Normalized loss-sharing weights r_g over unclipped running units; empty when
// no unit can take up the slack.
std::vector<double> loss_weights(const GridCase& grid, const detail::IslandNet& net,
                                 const std::vector<char>& clipped, int ref_bus, bool single_slack) {
  std::vector<double> weight(grid.generators.size(), 0.0);
  double sum = 0.0;
  for (int g : net.gens) {
    const auto& gen = grid.generators[g];
    if (clipped[g] || (single_slack && gen.bus != ref_bus)) continue;
    weight[g] = gen.slack_coeff >= 0.0 ? gen.slack_coeff : std::max(gen.p_max, 0.0);
    sum += weight[g];
  }
  if (sum <= 0.0)
    for (int g : net.gens)
      if (!clipped[g] && grid.generators[g].bus == ref_bus) {
        weight[g] = 1.0;
        sum += 1.0;
      }
  if (sum <= 0.0) return {};
  for (double& w : weight) w /= sum;
  return weight;
}

struct NewtonResult {
  SolveStatus status = SolveStatus::Diverged;
  int iterations = 0;
  double mismatch = 0.0;
};

// Solves for angles, PQ magnitudes and the shared slack `lambda` (p.u.).
NewtonResult newton(const NewtonProblem& prob, std::vector<double>& vm, std::vector<double>& va,
                    double& lambda, const PowerFlowOptions& opts, int island) {
  const auto& Y = *prob.ybus;
  const int n = static_cast<int>(vm.size());
  const auto idx = detail::index_unknowns(prob.ref, prob.pq);

  std::vector<cd> V(n);
  Eigen::VectorXd F(idx.rows);
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  NewtonResult res;

  for (int it = 0;; ++it) {
    for (int k = 0; k < n; ++k) V[k] = std::polar(vm[k], va[k]);
    const auto I = detail::bus_currents(Y, V);
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
      const cd s = V[k] * std::conj(I[k]);
      F[k] = s.real() - prob.p_spec[k] - prob.slack_share[k] * lambda;
      if (idx.q_row[k] >= 0) F[idx.q_row[k]] = s.imag() - prob.q_spec[k];
    }
    for (int r = 0; r < idx.rows; ++r) {
      if (!std::isfinite(F[r])) {
        res.status = SolveStatus::Diverged;
        res.iterations = it;
        return res;
      }
      worst = std::max(worst, std::abs(F[r]));
    }
    res.mismatch = worst;
    res.iterations = it;
    if (opts.trace)
      *opts.trace << "pf island=" << island << " iter=" << it << " mismatch=" << worst << '\n';
    if (worst <= opts.tolerance) {
      res.status = SolveStatus::Converged;
      return res;
    }
    if (it >= opts.max_iterations) {
      res.status = SolveStatus::Diverged;
      return res;
    }

    const auto J = detail::assemble_jacobian(Y, V, I, idx, prob.slack_share);
    if (!analyzed) {
      lu.analyzePattern(J);
      analyzed = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success) {
      res.status = SolveStatus::Singular;
      return res;
    }
    const Eigen::VectorXd dx = lu.solve(-F);
    if (lu.info() != Eigen::Success || !dx.allFinite()) {
      res.status = SolveStatus::Singular;
      return res;
    }
    for (int k = 0; k < n; ++k) {
      if (idx.th_col[k] >= 0) va[k] += dx[idx.th_col[k]];
      if (idx.vm_col[k] >= 0) vm[k] += dx[idx.vm_col[k]];
      if (vm[k] < 0.2 || vm[k] > 3.0) {
        res.status = SolveStatus::Diverged;
        res.iterations = it + 1;
        return res;
      }
    }
    lambda += dx[idx.lam_col];
  }
}

}  // namespace

namespace detail {

SystemState solve_island(const GridCase& grid, const Topology& topo, int island,
                         const DispatchTargets& targets, const SystemState& prior,
                         const PowerFlowOptions& opts, SolvedIsland* solved) {
  SystemState s = prior;
  s.island = island;
  s.gen_on = targets.gen_on;
  const auto net = detail::gather_island(grid, topo, island, targets.gen_on);
  for (int d : net.loads) s.shed_fraction[d] = 1.0 - targets.retained[d];
  for (int g : net.gens) s.p_set[g] = targets.p_gen[g];

  const int ref_global = island_reference_bus(grid, topo, island, targets.gen_on);
  if (ref_global < 0) return blackout_island(grid, topo, island, s);

  const int n = static_cast<int>(net.buses.size());
  const double base = grid.base_mva;
  const auto ybus = detail::make_ybus(grid, net);

  std::vector<double> load_p(n, 0.0), load_q(n, 0.0);
  for (int d : net.loads) {
    const int k = net.local[grid.loads[d].bus];
    load_p[k] += grid.loads[d].p * targets.retained[d];
    load_q[k] += grid.loads[d].q * targets.retained[d];
  }
  std::vector<std::vector<int>> gens_at(n);
  for (int g : net.gens) gens_at[net.local[grid.generators[g].bus]].push_back(g);

  NewtonProblem prob;
  prob.ybus = &ybus;
  prob.ref = net.local[ref_global];
  prob.pq.assign(n, 1);
  std::vector<double> v_set(n, 1.0);
  for (int k = 0; k < n; ++k)
    if (!gens_at[k].empty()) {
      prob.pq[k] = 0;
      const int b = net.buses[k];
      v_set[k] = !targets.v_set.empty() && targets.v_set[b] > 0.0
                     ? targets.v_set[b]
                     : grid.generators[gens_at[k].front()].v_set;
      if (!s.v_set.empty()) s.v_set[b] = v_set[k];
    }
  std::vector<double> q_fixed(n, 0.0);  // MVAr of units pinned at a reactive limit

  std::vector<double> p_target(grid.generators.size(), 0.0);
  std::vector<char> clipped(grid.generators.size(), 0);
  for (int g : net.gens) p_target[g] = targets.p_gen[g];

  std::vector<double> vm(n), va(n);
  bool warm = opts.warm_start;
  for (int k = 0; k < n && warm; ++k) warm = prior.v_mag[net.buses[k]] > 0.0;
  for (int k = 0; k < n; ++k) {
    vm[k] = warm ? prior.v_mag[net.buses[k]] : 1.0;
    va[k] = warm ? prior.v_ang[net.buses[k]] : 0.0;
    if (!prob.pq[k]) vm[k] = v_set[k];
  }

  double lambda = 0.0;
  int total_iters = 0;
  NewtonResult nr;
  for (int outer = 0;; ++outer) {
    auto weight = loss_weights(grid, net, clipped, ref_global, opts.single_slack);
    if (weight.empty()) {
      s.status = SolveStatus::Unbalanced;
      s.iterations = total_iters;
      return s;
    }
    prob.slack_share.assign(n, 0.0);
    for (int g : net.gens) prob.slack_share[net.local[grid.generators[g].bus]] += weight[g];

    prob.p_spec.assign(n, 0.0);
    prob.q_spec.assign(n, 0.0);
    for (int k = 0; k < n; ++k) {
      double pg = 0.0;
      for (int g : gens_at[k]) pg += p_target[g];
      prob.p_spec[k] = (pg - load_p[k]) / base;
      prob.q_spec[k] = (q_fixed[k] - load_q[k]) / base;
    }

    nr = newton(prob, vm, va, lambda, opts, island);
    total_iters += nr.iterations;
    if (nr.status != SolveStatus::Converged) {
      s.status = nr.status;
      s.iterations = total_iters;
      s.max_mismatch = nr.mismatch;
      return s;
    }
    if (outer >= opts.max_outer_loops) break;

    bool changed = false;
    for (int g : net.gens) {
      if (!opts.enforce_p_limits || clipped[g] || weight[g] == 0.0) continue;
      const auto& gen = grid.generators[g];
      const double p = p_target[g] + weight[g] * lambda * base;
      if (p > gen.p_max + 1e-9 || p < gen.p_min - 1e-9) {
        p_target[g] = p > gen.p_max ? gen.p_max : gen.p_min;
        clipped[g] = 1;
        changed = true;
      }
    }
    if (opts.enforce_q_limits) {
      std::vector<cd> V(n), I(n, cd(0.0));
      for (int k = 0; k < n; ++k) V[k] = std::polar(vm[k], va[k]);
      for (int c = 0; c < ybus.outerSize(); ++c)
        for (Eigen::SparseMatrix<cd>::InnerIterator e(ybus, c); e; ++e)
          I[e.row()] += e.value() * V[c];
      for (int k = 0; k < n; ++k) {
        if (prob.pq[k] || gens_at[k].empty()) continue;
        const double q_bus = (V[k] * std::conj(I[k])).imag() * base + load_q[k];
        double qmax = 0.0, qmin = 0.0;
        for (int g : gens_at[k]) {
          qmax += grid.generators[g].q_max;
          qmin += grid.generators[g].q_min;
        }
        if (q_bus > qmax + 1e-6 || q_bus < qmin - 1e-6) {
          prob.pq[k] = 1;
          q_fixed[k] = q_bus > qmax ? qmax : qmin;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }

  // Assemble the converged state.
  std::vector<cd> V(n), I(n, cd(0.0));
  for (int k = 0; k < n; ++k) V[k] = std::polar(vm[k], va[k]);
  for (int c = 0; c < ybus.outerSize(); ++c)
    for (Eigen::SparseMatrix<cd>::InnerIterator e(ybus, c); e; ++e) I[e.row()] += e.value() * V[c];
  double net_injection = 0.0;
  for (int k = 0; k < n; ++k) {
    const cd sk = V[k] * std::conj(I[k]);
    net_injection += sk.real();
    s.v_mag[net.buses[k]] = vm[k];
    s.v_ang[net.buses[k]] = va[k];
    if (gens_at[k].empty()) continue;
    const double q_bus = sk.imag() * base + load_q[k];
    double range = 0.0;
    for (int g : gens_at[k]) range += grid.generators[g].q_max - grid.generators[g].q_min;
    for (int g : gens_at[k]) {
      const auto& gen = grid.generators[g];
      s.q_gen[g] = range > 0.0 ? q_bus * (gen.q_max - gen.q_min) / range
                               : q_bus / static_cast<double>(gens_at[k].size());
    }
  }
  const auto weight = loss_weights(grid, net, clipped, ref_global, opts.single_slack);
  for (int g : net.gens) {
    s.p_set[g] = p_target[g];
    s.p_gen[g] = p_target[g] + (weight.empty() ? 0.0 : weight[g]) * lambda * base;
  }
  for (int l : net.branches) {
    const auto& br = grid.branches[l];
    const auto ends = detail::branch_end_flows(br, V[net.local[br.from]], V[net.local[br.to]]);
    s.branch_flow[l] = std::max(std::abs(ends.from), std::abs(ends.to)) * base;
  }
  s.p_loss = net_injection * base;
  s.status = SolveStatus::Converged;
  s.iterations = total_iters;
  s.max_mismatch = nr.mismatch;
  if (solved) {
    solved->net = net;
    solved->ybus = ybus;
    solved->ref = prob.ref;
    solved->pq = prob.pq;
    solved->slack_share = prob.slack_share;
    solved->gen_weight = weight.empty() ? std::vector<double>(grid.generators.size(), 0.0) : weight;
    solved->load_p = load_p;
    solved->load_q = load_q;
  }
  return s;
}

}  // namespace detail

SystemState solve_power_flow(const GridCase& grid, const Topology& topo, int island,
                             const DispatchTargets& targets, const SystemState& prior,
                             const PowerFlowOptions& opts) {
  return detail::solve_island(grid, topo, island, targets, prior, opts, nullptr);
}

SystemState collapse_fallback(const GridCase& grid, const Topology& topo, int island,
                              const DispatchTargets& targets, const SystemState& prior,
                              const PowerFlowOptions& opts) {
  PowerFlowOptions flat = opts;
  flat.warm_start = false;
  for (int step = 1; step < 20; ++step) {
    SystemState trial = prior;
    const double keep = 1.0 - 0.05 * step;
    for (size_t d = 0; d < grid.loads.size(); ++d)
      if (topo.island_of_bus[grid.loads[d].bus] == island)
        trial.shed_fraction[d] = 1.0 - targets.retained[d] * keep;
    for (size_t g = 0; g < grid.generators.size(); ++g)
      if (topo.island_of_bus[grid.generators[g].bus] == island) {
        trial.gen_on[g] = targets.gen_on[g];
        trial.p_set[g] = targets.p_gen[g];
      }
    const auto shed_targets = rebalance_island(grid, topo, island, trial);
    auto state = solve_power_flow(grid, topo, island, shed_targets, trial, flat);
    if (state.converged()) {
      state.collapsed = true;
      return state;
    }
  }
  auto dark = blackout_island(grid, topo, island, prior);
  dark.collapsed = true;
  return dark;
}

SystemState settle_island(const GridCase& grid, const Topology& topo, int island,
                          const SystemState& prior, const PowerFlowOptions& opts) {
  const auto targets = rebalance_island(grid, topo, island, prior);
  auto state = solve_power_flow(grid, topo, island, targets, prior, opts);
  state.collapsed = false;
  if (state.converged()) return state;
  return collapse_fallback(grid, topo, island, targets, prior, opts);
}

}  // namespace gridcfc
