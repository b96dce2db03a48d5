#pragma once

// Slow, direct reference implementations used to check the library.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gridcfc/grid_model.hpp"

namespace gridcfc::oracle {

// Branch betweenness by listing every shortest path (as a branch sequence)
// between every unordered bus pair with depth-first search.
inline std::vector<double> betweenness_by_enumeration(const GridCase& g) {
  const int nb = g.num_buses();
  const int nl = g.num_branches();
  std::vector<double> score(nl, 0.0);
  std::vector<char> on_path(nb, 0);
  std::vector<int> path;
  for (int s = 0; s < nb; ++s)
    for (int t = s + 1; t < nb; ++t) {
      int best = nb;  // simple paths have fewer than nb branches
      std::vector<std::vector<int>> found;
      std::function<void(int)> walk = [&](int v) {
        if (static_cast<int>(path.size()) > best) return;
        if (v == t) {
          if (static_cast<int>(path.size()) < best) {
            best = static_cast<int>(path.size());
            found.clear();
          }
          found.push_back(path);
          return;
        }
        for (int l = 0; l < nl; ++l) {
          const auto& br = g.branches[l];
          int w = -1;
          if (br.from == v) w = br.to;
          else if (br.to == v) w = br.from;
          if (w < 0 || w == v || on_path[w]) continue;
          on_path[w] = 1;
          path.push_back(l);
          walk(w);
          path.pop_back();
          on_path[w] = 0;
        }
      };
      on_path[s] = 1;
      walk(s);
      on_path[s] = 0;
      if (found.empty()) continue;
      std::vector<int> through(nl, 0);
      for (const auto& p : found)
        for (int l : p) ++through[l];
      for (int l = 0; l < nl; ++l)
        if (through[l]) score[l] += static_cast<double>(through[l]) / found.size();
    }
  return score;
}

// Flow on every branch (per unit) for a unit transfer from bus i to bus j,
// from the pseudo-inverse of the full DC Laplacian. Connected grids only.
struct DenseTransfer {
  Eigen::MatrixXd x;  // pseudo-inverse of the susceptance Laplacian
  std::vector<double> b;
  const GridCase* g;

  explicit DenseTransfer(const GridCase& grid) : g(&grid) {
    const int n = grid.num_buses();
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const auto& br : grid.branches) {
      const double y = 1.0 / (br.x * (br.tap != 0.0 ? br.tap : 1.0));
      b.push_back(y);
      lap(br.from, br.from) += y;
      lap(br.to, br.to) += y;
      lap(br.from, br.to) -= y;
      lap(br.to, br.from) -= y;
    }
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    x = (lap + ones).inverse() - ones;
  }

  double flow(int l, int i, int j) const {
    const auto& br = g->branches[l];
    return b[l] * ((x(br.from, i) - x(br.to, i)) - (x(br.from, j) - x(br.to, j)));
  }
};

inline std::vector<double> electrical_betweenness_dense(const GridCase& g, bool realtime = false) {
  DenseTransfer t(g);
  std::vector<double> cap(g.num_buses(), 0.0), load(g.num_buses(), 0.0);
  for (const auto& gen : g.generators) cap[gen.bus] += realtime ? gen.p : gen.p_max;
  for (const auto& d : g.loads) load[d.bus] += d.p;
  std::vector<double> score(g.num_branches(), 0.0);
  for (int i = 0; i < g.num_buses(); ++i)
    for (int j = 0; j < g.num_buses(); ++j) {
      if (i == j || cap[i] <= 0.0 || load[j] <= 0.0) continue;
      for (int l = 0; l < g.num_branches(); ++l)
        score[l] += std::sqrt(cap[i] * load[j]) * std::abs(t.flow(l, i, j));
    }
  return score;
}

inline std::vector<double> extended_betweenness_dense(const GridCase& g) {
  DenseTransfer t(g);
  std::vector<double> cap(g.num_buses(), 0.0), load(g.num_buses(), 0.0);
  for (const auto& gen : g.generators) cap[gen.bus] += gen.p_max;
  for (const auto& d : g.loads) load[d.bus] += d.p;
  const int nl = g.num_branches();
  std::vector<double> tp(nl, 0.0), tn(nl, 0.0);
  for (int i = 0; i < g.num_buses(); ++i)
    for (int j = 0; j < g.num_buses(); ++j) {
      if (i == j || cap[i] <= 0.0 || load[j] <= 0.0) continue;
      double p = INFINITY;
      for (int l = 0; l < nl; ++l) {
        const double f = std::abs(t.flow(l, i, j));
        if (f >= 1e-9) p = std::min(p, g.branches[l].f_lim1 / f);
      }
      if (!std::isfinite(p)) continue;
      for (int l = 0; l < nl; ++l) {
        const double f = t.flow(l, i, j);
        tp[l] += std::max(f, 0.0) * p;
        tn[l] += std::abs(std::min(f, 0.0)) * p;
      }
    }
  std::vector<double> score(nl);
  for (int l = 0; l < nl; ++l) score[l] = std::max(tp[l], tn[l]);
  return score;
}

struct HitsFixedPoint {
  Eigen::VectorXd auth, hub;
};

// Fixed number of normalized HITS sweeps written with dense matrix algebra.
inline HitsFixedPoint hits_by_iteration(const Eigen::MatrixXd& w, int sweeps = 10000) {
  const int n = static_cast<int>(w.rows());
  Eigen::MatrixXd m = w;
  m.diagonal().setZero();
  Eigen::MatrixXd row_share = m, col_share = m;
  for (int i = 0; i < n; ++i) {
    const double rs = m.row(i).sum();
    if (rs > 0.0) row_share.row(i) /= rs;
    const double cs = m.col(i).sum();
    if (cs > 0.0) col_share.col(i) /= cs;
  }
  HitsFixedPoint fp{Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(n)};
  for (int k = 0; k < sweeps; ++k) {
    fp.auth = row_share.transpose() * fp.hub;
    fp.auth.normalize();
    fp.hub = col_share * fp.auth;
    fp.hub.normalize();
  }
  return fp;
}

// Random connected multigraph on n buses with unit-free reactances, a few
// generators and loads; every bus lies on a spanning tree plus extra branches.
inline GridCase random_connected_case(std::mt19937_64& rng, int n, int extra) {
  GridCase g;
  g.name = "random";
  for (int i = 0; i < n; ++i) {
    Bus b;
    b.id = i + 1;
    g.buses.push_back(b);
  }
  std::uniform_real_distribution<double> reactance(0.02, 0.5), limit(50.0, 400.0),
      mw(10.0, 200.0);
  auto add = [&](int a, int b) {
    Branch br;
    br.id = g.num_branches() + 1;
    br.from = a;
    br.to = b;
    br.x = reactance(rng);
    br.f_lim1 = limit(rng);
    br.f_lim2 = 1.5 * br.f_lim1;
    g.branches.push_back(br);
  };
  for (int i = 1; i < n; ++i) add(std::uniform_int_distribution<int>(0, i - 1)(rng), i);
  for (int k = 0; k < extra; ++k) {
    const int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
    int b = std::uniform_int_distribution<int>(0, n - 2)(rng);
    if (b >= a) ++b;
    add(a, b);
  }
  std::bernoulli_distribution coin(0.4);
  for (int i = 0; i < n; ++i) {
    if (coin(rng) || i == 0) {
      Generator gen;
      gen.id = static_cast<int>(g.generators.size()) + 1;
      gen.bus = i;
      gen.p_max = mw(rng);
      gen.p = 0.5 * gen.p_max;
      g.generators.push_back(gen);
    }
    if (coin(rng) || i == n - 1) {
      Load d;
      d.id = static_cast<int>(g.loads.size()) + 1;
      d.bus = i;
      d.p = mw(rng);
      g.loads.push_back(d);
    }
  }
  g.buses[0].type = BusType::Ref;
  return g;
}

}  // namespace gridcfc::oracle
