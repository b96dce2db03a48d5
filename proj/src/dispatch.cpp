#include "gridcfc/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseLU>

#include "ac_network.hpp"
#include "dispatch_model.hpp"
#include "gridcfc/error.hpp"
#include "lp.hpp"

namespace gridcfc {

using detail::cd;

Violations find_violations(const GridCase& grid, const Topology& topo, int island,
                           const SystemState& state, double flow_tol_mw, double voltage_tol) {
  Violations v;
  for (int l = 0; l < grid.num_branches(); ++l) {
    if (!topo.in_service[l] || topo.island_of_bus[grid.branches[l].from] != island) continue;
    if (state.branch_flow[l] > grid.branches[l].f_lim1 + flow_tol_mw) v.branches.push_back(l);
  }
  for (int b : topo.island(island).buses) {
    const double vm = state.v_mag[b];
    if (vm == 0.0) continue;  // de-energized
    if (vm < grid.buses[b].v_min - voltage_tol || vm > grid.buses[b].v_max + voltage_tol)
      v.buses.push_back(b);
  }
  return v;
}

namespace {

constexpr double kPenalty = 1e3;
constexpr double kVoltageScale = 1e3;  // p.u. rows expressed in mV-sized units
constexpr double kLpInfinity = std::numeric_limits<double>::infinity();

double served(const GridCase& grid, const detail::IslandNet& net, const SystemState& s) {
  double total = 0.0;
  for (int d : net.loads) total += grid.loads[d].p * (1.0 - s.shed_fraction[d]);
  return total;
}

// Overload at both branch ends plus scaled voltage excursions.
double violation_size(const GridCase& grid, const Topology& topo, int island,
                      const SystemState& s) {
  const auto v = find_violations(grid, topo, island, s, 0.0, 0.0);
  double total = 0.0;
  for (int l : v.branches) {
    const auto& br = grid.branches[l];
    const auto ends = detail::branch_end_flows(br, std::polar(s.v_mag[br.from], s.v_ang[br.from]),
                                               std::polar(s.v_mag[br.to], s.v_ang[br.to]));
    for (cd end : {ends.from, ends.to})
      total += std::max(0.0, std::abs(end) * grid.base_mva - br.f_lim1);
  }
  for (int b : v.buses)
    total += kVoltageScale * std::max(grid.buses[b].v_min - s.v_mag[b], s.v_mag[b] - grid.buses[b].v_max);
  return total;
}

// Linear model of an island around a converged state: every decision
// variable's effect on the Newton unknowns, from one forward solve each.
class Linearization {
 public:
  Linearization(const detail::SolvedIsland& solved, const SystemState& s)
      : solved_(solved), ybus_rows_(solved.ybus) {
    const auto& net = solved.net;
    const int n = static_cast<int>(net.buses.size());
    v_.resize(n);
    for (int k = 0; k < n; ++k) v_[k] = std::polar(s.v_mag[net.buses[k]], s.v_ang[net.buses[k]]);
    idx_ = detail::index_unknowns(solved.ref, solved.pq);
    const auto current = detail::bus_currents(solved.ybus, v_);
    const auto jac = detail::assemble_jacobian(solved.ybus, v_, current, idx_, solved.slack_share);
    lu_.analyzePattern(jac);
    lu_.factorize(jac);
    ok_ = lu_.info() == Eigen::Success;
  }

  bool ok() const { return ok_; }
  const detail::JacobianIndex& index() const { return idx_; }
  cd voltage(int local) const { return v_[local]; }

  // Columns of d(unknowns)/d(variable) for the given specification changes.
  bool solve(const Eigen::MatrixXd& rhs, Eigen::MatrixXd& out) {
    out = lu_.solve(rhs);
    return lu_.info() == Eigen::Success && out.allFinite();
  }

  // Apparent power magnitude (p.u.) at one branch end and its gradient as
  // (unknown column, derivative) pairs.
  double flow_gradient(const Branch& br, bool from_end,
                       std::vector<std::pair<int, double>>& grad) const {
    const auto y = detail::branch_admittance(br);
    const int a = solved_.net.local[from_end ? br.from : br.to];
    const int b = solved_.net.local[from_end ? br.to : br.from];
    const cd ya = from_end ? y.yff : y.ytt;
    const cd yb = from_end ? y.yft : y.ytf;
    const cd va = v_[a], vb = v_[b];
    const double ma = std::abs(va), mb = std::abs(vb);
    const cd cross = va * std::conj(yb * vb);
    const cd s = std::conj(ya) * ma * ma + cross;
    const cd j(0.0, 1.0);
    const double mag = std::max(std::abs(s), 1e-12);
    auto proj = [&](cd d) { return (s.real() * d.real() + s.imag() * d.imag()) / mag; };
    grad.clear();
    if (idx_.th_col[a] >= 0) grad.emplace_back(idx_.th_col[a], proj(j * cross));
    if (idx_.th_col[b] >= 0) grad.emplace_back(idx_.th_col[b], proj(-j * cross));
    grad.emplace_back(magnitude_col(a), proj(2.0 * ma * std::conj(ya) + cross / ma));
    grad.emplace_back(magnitude_col(b), proj(cross / mb));
    return std::abs(s);
  }

  // Unknown index of a bus voltage magnitude; regulated buses map past the
  // Newton unknowns, where their set-point is the variable.
  int magnitude_col(int local) const {
    return idx_.vm_col[local] >= 0 ? idx_.vm_col[local] : idx_.cols + local;
  }

  // Injection S_c = V_c conj(I_c) (p.u.) and the gradient of its imaginary part.
  double reactive_gradient(int c, std::vector<std::pair<int, double>>& grad) const {
    const cd j(0.0, 1.0);
    grad.clear();
    cd ic(0.0);
    for (Eigen::SparseMatrix<cd, Eigen::RowMajor>::InnerIterator e(ybus_rows_, c); e; ++e)
      ic += e.value() * v_[e.col()];
    const cd vc = v_[c];
    for (Eigen::SparseMatrix<cd, Eigen::RowMajor>::InnerIterator e(ybus_rows_, c); e; ++e) {
      const int k = static_cast<int>(e.col());
      const cd term = vc * std::conj(e.value() * v_[k]);
      cd d_th = -j * term, d_vm = term / std::abs(v_[k]);
      if (k == c) {
        d_th += j * vc * std::conj(ic);
        d_vm += std::conj(ic) * vc / std::abs(vc);
      }
      if (idx_.th_col[k] >= 0) grad.emplace_back(idx_.th_col[k], d_th.imag());
      grad.emplace_back(magnitude_col(k), d_vm.imag());
    }
    return (vc * std::conj(ic)).imag();
  }

  // d(mismatch)/d(|V_c|) for a regulated bus c, as a dense vector over rows.
  Eigen::VectorXd magnitude_column(int c) const {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(idx_.rows);
    const cd vc = v_[c];
    const double mc = std::abs(vc);
    cd ic(0.0);
    for (Eigen::SparseMatrix<cd, Eigen::RowMajor>::InnerIterator e(ybus_rows_, c); e; ++e)
      ic += e.value() * v_[e.col()];
    for (Eigen::SparseMatrix<cd>::InnerIterator e(solved_.ybus, c); e; ++e) {
      const int i = static_cast<int>(e.row());
      cd d = v_[i] * std::conj(e.value() * vc / mc);
      if (i == c) d += std::conj(ic) * vc / mc;
      col[i] += d.real();
      if (idx_.q_row[i] >= 0) col[idx_.q_row[i]] += d.imag();
    }
    return col;
  }

 private:
  const detail::SolvedIsland& solved_;
  Eigen::SparseMatrix<cd, Eigen::RowMajor> ybus_rows_;
  std::vector<cd> v_;
  detail::JacobianIndex idx_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  bool ok_ = false;
};

struct Step {
  std::vector<double> d_retained;  // per load
  std::vector<double> d_pset;      // per generator
  std::vector<double> d_vset;      // per bus
  bool moved = false;
  double predicted_gain = 0.0;    // merit reduction the linear model expects
  double restored_mw = 0.0;       // served load the step adds
};

struct Radius {
  double mw, load, volt;
};

// A linearized limit: value + sens·x within [lo, hi].
struct Candidate {
  std::vector<double> sens;
  double value = 0.0;
  double lo = -detail::kLpInf;
  double hi = detail::kLpInf;
  int key = 0;  // stable identity across linearizations
  bool screened = false;
  bool active = false;
};

// One linear program around the current state, with rows added while the
// predicted solution breaks a limit that was left out. Returns false when the
// linearization is unusable.
bool plan_step(const GridCase& grid, const detail::SolvedIsland& solved, const SystemState& s,
               const std::vector<double>& ceiling, const DispatchOptions& opts,
               const Radius& radius, std::vector<char>& sticky, Step& step) {
  Linearization lin(solved, s);
  if (!lin.ok()) return false;
  const auto& net = solved.net;
  const double base = grid.base_mva;
  const auto& idx = lin.index();

  detail::LinearProgram lp;
  std::vector<int> load_var(grid.loads.size(), -1), gen_var(grid.generators.size(), -1);
  std::vector<std::pair<int, double>> var_p, var_q;  // (row, spec change) per variable
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(idx.rows, 0);
  std::vector<Eigen::VectorXd> cols;
  const double nl = static_cast<double>(std::max<size_t>(grid.loads.size(), 1));
  for (int d : net.loads) {
    const auto& load = grid.loads[d];
    const double kept = 1.0 - s.shed_fraction[d];
    if (ceiling[d] <= 0.0 || (load.p == 0.0 && load.q == 0.0)) continue;
    // Lower ids are shed first among equally effective options.
    const double value = load.p + 1e-6 * (1.0 + d / nl);
    load_var[d] = lp.add_var(-value, -std::min(kept, radius.load),
                             std::max(0.0, std::min(ceiling[d] - kept, radius.load)));
    const int k = net.local[load.bus];
    Eigen::VectorXd c = Eigen::VectorXd::Zero(idx.rows);
    c[k] = -load.p / base;
    if (idx.q_row[k] >= 0) c[idx.q_row[k]] = -load.q / base;
    cols.push_back(std::move(c));
  }
  for (int g : net.gens) {
    const auto& gen = grid.generators[g];
    gen_var[g] = lp.add_var(0.0, std::min(0.0, std::max(gen.p_min - s.p_set[g], -radius.mw)),
                            std::max(0.0, std::min(gen.p_max - s.p_set[g], radius.mw)));
    Eigen::VectorXd c = Eigen::VectorXd::Zero(idx.rows);
    c[net.local[gen.bus]] = 1.0 / base;
    cols.push_back(std::move(c));
  }
  const int n = static_cast<int>(net.buses.size());
  std::vector<int> volt_var(n, -1);
  std::vector<char> regulated(n, 0);
  for (int g : net.gens) regulated[net.local[grid.generators[g].bus]] = 1;
  for (int k = 0; k < n; ++k) {
    if (!regulated[k] || idx.vm_col[k] >= 0) continue;
    const auto& bus = grid.buses[net.buses[k]];
    const double vm = s.v_mag[net.buses[k]];
    volt_var[k] = lp.add_var(0.0, std::min(0.0, std::max(bus.v_min - vm, -radius.volt)),
                             std::max(0.0, std::min(bus.v_max - vm, radius.volt)));
    cols.push_back(-lin.magnitude_column(k));
  }
  const int nv = lp.num_vars();
  if (nv == 0) return false;
  rhs.resize(idx.rows, nv);
  for (int v = 0; v < nv; ++v) rhs.col(v) = cols[v];
  Eigen::MatrixXd solved_dx;
  if (!lin.solve(rhs, solved_dx)) return false;
  Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(idx.cols + n, nv);
  dx.topRows(idx.cols) = solved_dx;
  for (int k = 0; k < n; ++k)
    if (volt_var[k] >= 0) dx(idx.cols + k, volt_var[k]) = 1.0;

  std::vector<Candidate> cand;
  std::vector<std::pair<int, double>> grad;
  for (int l : net.branches) {
    const auto& br = grid.branches[l];
    for (bool from_end : {true, false}) {
      Candidate c;
      c.value = base * lin.flow_gradient(br, from_end, grad);
      c.sens.assign(nv, 0.0);
      for (auto [col, gv] : grad)
        for (int v = 0; v < nv; ++v) c.sens[v] += base * gv * dx(col, v);
      c.hi = br.f_lim1 - opts.flow_margin_mw;
      c.key = 2 * l + (from_end ? 0 : 1);
      c.screened = c.value >= opts.flow_screen * br.f_lim1;
      cand.push_back(std::move(c));
    }
  }
  for (size_t k = 0; k < net.buses.size(); ++k) {
    if (idx.vm_col[k] < 0) continue;
    const auto& bus = grid.buses[net.buses[k]];
    Candidate c;
    c.value = kVoltageScale * s.v_mag[net.buses[k]];
    c.sens.resize(nv);
    for (int v = 0; v < nv; ++v) c.sens[v] = kVoltageScale * dx(idx.vm_col[k], v);
    c.lo = kVoltageScale * (bus.v_min + opts.voltage_margin);
    c.hi = kVoltageScale * (bus.v_max - opts.voltage_margin);
    c.key = 2 * grid.num_branches() + net.buses[k];
    c.screened = c.value < kVoltageScale * (bus.v_min + opts.voltage_screen) ||
                 c.value > kVoltageScale * (bus.v_max - opts.voltage_screen);
    cand.push_back(std::move(c));
  }
  // Realized unit output includes its share of the slack.
  for (int g : net.gens) {
    const double w = solved.gen_weight[g];
    if (w == 0.0) continue;
    const auto& gen = grid.generators[g];
    Candidate c;
    c.value = s.p_gen[g];
    c.sens.resize(nv);
    for (int v = 0; v < nv; ++v) c.sens[v] = w * base * dx(idx.lam_col, v);
    c.sens[gen_var[g]] += 1.0;
    c.lo = gen.p_min;
    c.hi = gen.p_max;
    c.key = 2 * grid.num_branches() + grid.num_buses() + g;
    c.screened = std::min(c.value - c.lo, c.hi - c.value) < opts.output_screen_mw;
    cand.push_back(std::move(c));
  }

  // Reactive capability of regulated buses.
  for (int k = 0; k < n; ++k) {
    if (volt_var[k] < 0) continue;
    double qmin = 0.0, qmax = 0.0;
    for (int g : net.gens)
      if (net.local[grid.generators[g].bus] == k) {
        qmin += grid.generators[g].q_min;
        qmax += grid.generators[g].q_max;
      }
    Candidate c;
    c.value = base * lin.reactive_gradient(k, grad) + solved.load_q[k];
    c.sens.assign(nv, 0.0);
    for (auto [col, gv] : grad)
      for (int v = 0; v < nv; ++v) c.sens[v] += base * gv * dx(col, v);
    for (int d : net.loads)
      if (load_var[d] >= 0 && net.local[grid.loads[d].bus] == k) c.sens[load_var[d]] += grid.loads[d].q;
    c.lo = qmin;
    c.hi = qmax;
    c.key = 2 * grid.num_branches() + grid.num_buses() + static_cast<int>(grid.generators.size()) +
            net.buses[k];
    cand.push_back(std::move(c));
  }

  detail::LpRow balance;
  balance.coef.assign(nv, 0.0);
  for (int d : net.loads)
    if (load_var[d] >= 0) balance.coef[load_var[d]] = -grid.loads[d].p;
  for (int g : net.gens) balance.coef[gen_var[g]] = 1.0;
  balance.sense = detail::RowSense::Equal;

  // Rows broken at zero step get an elastic column, which keeps the program
  // feasible there.
  double zero_step_cost = 0.0;
  auto add_row = [&](const Candidate& c, detail::RowSense sense, double bound) {
    const double excess =
        sense == detail::RowSense::LessEqual ? c.value - bound : bound - c.value;
    zero_step_cost += kPenalty * std::max(0.0, excess);
    detail::LpRow row;
    row.coef = c.sens;
    row.coef.resize(lp.num_vars(), 0.0);
    row.sense = sense;
    row.rhs = bound - c.value;
    lp.rows.push_back(std::move(row));
    if (excess <= 0.0) return;
    const int e = lp.add_var(kPenalty, 0.0, detail::kLpInf);
    lp.rows.back().coef[e] = sense == detail::RowSense::LessEqual ? -1.0 : 1.0;
  };
  auto activate = [&](Candidate& c) {
    c.active = true;
    if (std::isfinite(c.hi)) add_row(c, detail::RowSense::LessEqual, c.hi);
    if (std::isfinite(c.lo)) add_row(c, detail::RowSense::GreaterEqual, c.lo);
  };
  for (auto& c : cand)
    if (c.screened || sticky[c.key]) activate(c);

  detail::LpResult res;
  for (int round = 0;; ++round) {
    detail::LinearProgram full = lp;
    balance.coef.resize(full.num_vars(), 0.0);
    full.rows.push_back(balance);
    res = detail::solve_lp(full);
    if (res.status != detail::LpStatus::Optimal) return false;
    if (round >= 8) break;
    bool added = false;
    for (auto& c : cand) {
      if (c.active) continue;
      double pred = c.value;
      for (int v = 0; v < nv; ++v) pred += c.sens[v] * res.x[v];
      if (pred > c.hi || pred < c.lo) {
        sticky[c.key] = 1;
        activate(c);
        added = true;
      }
    }
    if (!added) break;
  }

  step.predicted_gain = zero_step_cost - res.objective;
  step.d_retained.assign(grid.loads.size(), 0.0);
  step.d_pset.assign(grid.generators.size(), 0.0);
  step.moved = false;
  step.restored_mw = 0.0;
  for (int d : net.loads)
    if (load_var[d] >= 0) {
      step.d_retained[d] = res.x[load_var[d]];
      step.restored_mw += grid.loads[d].p * res.x[load_var[d]];
      step.moved |= std::abs(res.x[load_var[d]]) > 1e-9;
    }
  for (int g : net.gens) {
    step.d_pset[g] = res.x[gen_var[g]];
    step.moved |= std::abs(res.x[gen_var[g]]) > 1e-6;
  }
  step.d_vset.assign(grid.num_buses(), 0.0);
  for (int k = 0; k < n; ++k)
    if (volt_var[k] >= 0) {
      step.d_vset[net.buses[k]] = res.x[volt_var[k]];
      step.moved |= std::abs(res.x[volt_var[k]]) > 1e-7;
    }
  return true;
}

}  // namespace

bool detail::predict(const GridCase& grid, const SolvedIsland& solved, const SystemState& state,
                     const Perturbation& dp, Prediction& out) {
  Linearization lin(solved, state);
  if (!lin.ok()) return false;
  const auto& net = solved.net;
  const auto& idx = lin.index();
  const double base = grid.base_mva;
  const int n = static_cast<int>(net.buses.size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(idx.rows);
  for (int d : net.loads) {
    const int k = net.local[grid.loads[d].bus];
    rhs[k] -= grid.loads[d].p * dp.d_retained[d] / base;
    if (idx.q_row[k] >= 0) rhs[idx.q_row[k]] -= grid.loads[d].q * dp.d_retained[d] / base;
  }
  for (int g : net.gens) rhs[net.local[grid.generators[g].bus]] += dp.d_pset[g] / base;
  Eigen::VectorXd ext = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k)
    if (idx.vm_col[k] < 0 && dp.d_vset[net.buses[k]] != 0.0) {
      ext[k] = dp.d_vset[net.buses[k]];
      rhs -= lin.magnitude_column(k) * ext[k];
    }
  Eigen::MatrixXd sol;
  if (!lin.solve(rhs, sol)) return false;
  Eigen::VectorXd dx(idx.cols + n);
  dx << sol.col(0), ext;

  out.branch_flow = state.branch_flow;
  out.v_mag = state.v_mag;
  out.p_gen = state.p_gen;
  std::vector<std::pair<int, double>> grad;
  for (int l : net.branches) {
    double best = 0.0;
    for (bool from_end : {true, false}) {
      double f = lin.flow_gradient(grid.branches[l], from_end, grad);
      for (auto [c, gv] : grad) f += gv * dx[c];
      best = std::max(best, f * base);
    }
    out.branch_flow[l] = best;
  }
  for (int k = 0; k < n; ++k) out.v_mag[net.buses[k]] += dx[lin.magnitude_col(k)];
  for (int g : net.gens)
    out.p_gen[g] += dp.d_pset[g] + solved.gen_weight[g] * base * dx[idx.lam_col];
  return true;
}

namespace {

DispatchSolution finish(const GridCase& grid, const detail::IslandNet& net, SystemState s,
                        bool feasible, int iterations) {
  DispatchSolution sol;
  sol.retained.resize(grid.loads.size());
  for (size_t d = 0; d < grid.loads.size(); ++d) sol.retained[d] = 1.0 - s.shed_fraction[d];
  sol.p_gen = s.p_gen;
  sol.q_gen = s.q_gen;
  sol.v_mag = s.v_mag;
  sol.objective = served(grid, net, s);
  sol.feasible = feasible;
  sol.iterations = iterations;
  sol.state = std::move(s);
  return sol;
}

}  // namespace

DispatchSolution emergent_dispatch(const GridCase& grid, const Topology& topo, int island,
                                   const SystemState& state, const DispatchOptions& opts) {
  if (!state.converged())
    throw Error(ErrorCode::InvalidArgument, "emergent dispatch needs a converged state");
  const auto net = detail::gather_island(grid, topo, island, state.gen_on);
  auto clean = [&](const SystemState& s) {
    return s.converged() &&
           !find_violations(grid, topo, island, s, opts.flow_tol_mw, opts.voltage_tol).any();
  };
  if (clean(state)) return finish(grid, net, state, true, 0);

  // Successive linear programming from a re-solve that records the layout.
  detail::SolvedIsland solved;
  SystemState cur = detail::solve_island(grid, topo, island, targets_from(state), state,
                                         opts.power_flow, &solved);
  int it = 0;
  std::vector<double> ceiling(grid.loads.size());
  for (size_t d = 0; d < ceiling.size(); ++d) ceiling[d] = 1.0 - state.shed_fraction[d];
  if (cur.converged()) {
    auto merit = [&](const SystemState& x) {
      return kPenalty * violation_size(grid, topo, island, x) - served(grid, net, x);
    };
    Radius radius{opts.trust_mw, opts.trust_load, opts.trust_volt};
    auto scale_radius = [&](double f) {
      radius.mw = std::min(radius.mw * f, opts.trust_mw_max);
      radius.load = std::min(radius.load * f, 1.0);
      radius.volt = std::min(radius.volt * f, 4.0 * opts.trust_volt);
    };
    std::vector<char> sticky(2 * grid.num_branches() + 2 * grid.num_buses() +
                             grid.generators.size());
    double cur_merit = merit(cur);
    // Once clean, further steps only restore load and must stay clean.
    bool cur_clean = clean(cur);
    for (int planned = 0; planned < opts.max_iterations; ++planned) {
      Step step;
      if (cur_clean) {
        double missing = 0.0;
        for (int d : net.loads)
          missing += grid.loads[d].p * (ceiling[d] - 1.0 + cur.shed_fraction[d]);
        if (missing <= opts.restore_tol_mw) break;
      }
      if (!plan_step(grid, solved, cur, ceiling, opts, radius, sticky, step) || !step.moved ||
          step.predicted_gain <= 1e-9 || (cur_clean && step.restored_mw <= opts.restore_tol_mw))
        break;
      auto targets = targets_from(cur);
      for (int d : net.loads)
        targets.retained[d] = std::clamp(targets.retained[d] + step.d_retained[d], 0.0,
                                         1.0 - state.shed_fraction[d]);
      for (int g : net.gens) targets.p_gen[g] += step.d_pset[g];
      for (int b : net.buses)
        if (step.d_vset[b] != 0.0) targets.v_set[b] = cur.v_mag[b] + step.d_vset[b];
      detail::SolvedIsland trial_layout;
      auto trial =
          detail::solve_island(grid, topo, island, targets, cur, opts.power_flow, &trial_layout);
      const double trial_merit = trial.converged() ? merit(trial) : kLpInfinity;
      const double ratio = (cur_merit - trial_merit) / step.predicted_gain;
      const bool trial_clean = clean(trial);
      if (ratio > 0.1 && (trial_clean || !cur_clean)) {
        cur_clean = trial_clean;
        cur = std::move(trial);
        solved = std::move(trial_layout);
        cur_merit = trial_merit;
        ++it;
      }
      if (ratio > 0.75 && (trial_clean || !cur_clean))
        scale_radius(1.0 / opts.damping);
      else if (ratio < 0.25 || (cur_clean && !trial_clean))
        scale_radius(opts.damping * opts.damping);
      if (radius.mw < 1e-2 && radius.load < 1e-5 && radius.volt < 1e-6) break;
    }
    if (clean(cur)) return finish(grid, net, cur, true, it);
  }

  // Fallback: largest uniform scaling of the entry dispatch that is clean.
  auto scaled = [&](double keep) {
    SystemState trial = state;
    for (int d : net.loads) trial.shed_fraction[d] = 1.0 - (1.0 - state.shed_fraction[d]) * keep;
    const auto targets = rebalance_island(grid, topo, island, trial);
    return solve_power_flow(grid, topo, island, targets, trial, opts.power_flow);
  };
  double lo = 0.0, hi = 1.0;
  SystemState best;
  bool found = false;
  for (int k = 0; k < opts.bisection_steps; ++k) {
    const double mid = 0.5 * (lo + hi);
    auto trial = scaled(mid);
    if (clean(trial)) {
      lo = mid;
      best = std::move(trial);
      found = true;
    } else {
      hi = mid;
    }
  }
  if (found) return finish(grid, net, std::move(best), true, it);
  return finish(grid, net, blackout_island(grid, topo, island, state), false, it);
}

}  // namespace gridcfc
