#include "gridcfc/structural.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>

#include "gridcfc/error.hpp"
#include "gridcfc/ranking.hpp"

namespace gridcfc {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

StructuralScores finish(StructuralMetric metric, std::vector<double> score) {
  StructuralScores s;
  s.metric = metric;
  s.order = order_by_score(score);
  s.score = std::move(score);
  return s;
}

std::vector<double> bus_capacity(const GridCase& grid, bool realtime) {
  std::vector<double> cap(grid.num_buses(), 0.0);
  for (const auto& g : grid.generators) cap[g.bus] += realtime ? g.p : g.p_max;
  return cap;
}

std::vector<double> bus_load(const GridCase& grid) {
  std::vector<double> load(grid.num_buses(), 0.0);
  for (const auto& d : grid.loads) load[d.bus] += d.p;
  return load;
}

// Generator/load bus pairs within one island, i != j.
template <class F>
void for_each_transfer(const GridCase& grid, const ShiftFactors& sf, const StructuralOptions& opts,
                       F&& visit) {
  const auto cap = bus_capacity(grid, opts.realtime_output);
  const auto load = bus_load(grid);
  for (int i = 0; i < grid.num_buses(); ++i) {
    if (!(cap[i] > 0.0)) continue;
    for (int j = 0; j < grid.num_buses(); ++j)
      if (j != i && load[j] > 0.0 && sf.island_of_bus[i] == sf.island_of_bus[j])
        visit(i, j, cap[i], load[j]);
  }
}

}  // namespace

StructuralMetric parse_structural_metric(const std::string& tag) {
  if (tag == "b1" || tag == "B1") return StructuralMetric::Betweenness;
  if (tag == "b2" || tag == "B2") return StructuralMetric::Electrical;
  if (tag == "b3" || tag == "B3") return StructuralMetric::Extended;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + tag + "' (expected b1, b2 or b3)");
}

const char* to_string(StructuralMetric metric) {
  switch (metric) {
    case StructuralMetric::Betweenness: return "b1";
    case StructuralMetric::Electrical: return "b2";
    case StructuralMetric::Extended: return "b3";
  }
  return "?";
}

ShiftFactors shift_factors(const GridCase& grid, const StructuralOptions& opts) {
  const int nb = grid.num_buses();
  const int nl = grid.num_branches();
  const auto topo = compute_islands(grid, std::vector<char>(nl, 1));
  ShiftFactors sf;
  sf.n_branches = nl;
  sf.n_buses = nb;
  sf.f.assign(static_cast<size_t>(nl) * nb, 0.0);
  sf.slack_of_bus.assign(nb, -1);
  sf.island_of_bus = topo.island_of_bus;

  const auto cap = bus_capacity(grid, false);
  std::vector<double> susceptance(nl);
  for (int l = 0; l < nl; ++l) {
    const auto& br = grid.branches[l];
    const double tap = br.tap != 0.0 ? br.tap : 1.0;
    if (br.x == 0.0)
      throw Error(ErrorCode::Numerical, "branch " + grid.branch_label(l) + " has zero reactance");
    susceptance[l] = 1.0 / (br.x * tap);
  }

  for (const auto& isl : topo.islands) {
    int slack = isl.buses.front();
    if (opts.slack_bus >= 0 && topo.island_of_bus[opts.slack_bus] == isl.id) {
      slack = opts.slack_bus;
    } else {
      for (int b : isl.buses)
        if (cap[b] > cap[slack]) slack = b;
    }
    for (int b : isl.buses) sf.slack_of_bus[b] = slack;
    const int m = static_cast<int>(isl.buses.size());
    if (m == 1) continue;

    std::vector<int> pos(nb, -1);
    int k = 0;
    for (int b : isl.buses)
      if (b != slack) pos[b] = k++;
    Eigen::MatrixXd bred = Eigen::MatrixXd::Zero(m - 1, m - 1);
    std::vector<int> lines;
    for (int l = 0; l < nl; ++l) {
      const auto& br = grid.branches[l];
      if (topo.island_of_bus[br.from] != isl.id || br.from == br.to) continue;
      lines.push_back(l);
      const int a = pos[br.from], c = pos[br.to];
      const double y = susceptance[l];
      if (a >= 0) bred(a, a) += y;
      if (c >= 0) bred(c, c) += y;
      if (a >= 0 && c >= 0) {
        bred(a, c) -= y;
        bred(c, a) -= y;
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(bred);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().cwiseAbs().minCoeff() < 1e-12 * ldlt.vectorD().cwiseAbs().maxCoeff())
      throw Error(ErrorCode::Numerical,
                  "singular reduced susceptance matrix in the island of bus " +
                      std::to_string(grid.buses[slack].id));
    const Eigen::MatrixXd x = ldlt.solve(Eigen::MatrixXd::Identity(m - 1, m - 1));
    for (int l : lines) {
      const auto& br = grid.branches[l];
      const int a = pos[br.from], c = pos[br.to];
      for (int b : isl.buses) {
        const int q = pos[b];
        if (q < 0) continue;
        const double ta = a >= 0 ? x(a, q) : 0.0;
        const double tc = c >= 0 ? x(c, q) : 0.0;
        sf.f[static_cast<size_t>(l) * nb + b] = susceptance[l] * (ta - tc);
      }
    }
  }
  return sf;
}

StructuralScores betweenness(const GridCase& grid) {
  const int nb = grid.num_buses();
  const int nl = grid.num_branches();
  std::vector<std::vector<std::pair<int, int>>> adj(nb);  // (neighbour, branch)
  for (int l = 0; l < nl; ++l) {
    const auto& br = grid.branches[l];
    if (br.from == br.to) continue;
    adj[br.from].push_back({br.to, l});
    adj[br.to].push_back({br.from, l});
  }
  std::vector<double> score(nl, 0.0);
  std::vector<int> dist(nb);
  std::vector<double> paths(nb), dep(nb);
  std::vector<int> visit;
  for (int s = 0; s < nb; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(paths.begin(), paths.end(), 0.0);
    std::fill(dep.begin(), dep.end(), 0.0);
    visit.clear();
    std::deque<int> queue{s};
    dist[s] = 0;
    paths[s] = 1.0;
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      visit.push_back(v);
      for (auto [w, l] : adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) paths[w] += paths[v];
      }
    }
    for (auto it = visit.rbegin(); it != visit.rend(); ++it) {
      const int w = *it;
      for (auto [v, l] : adj[w])
        if (dist[v] >= 0 && dist[v] + 1 == dist[w]) {
          const double c = paths[v] / paths[w] * (1.0 + dep[w]);
          score[l] += c;
          dep[v] += c;
        }
    }
  }
  for (double& v : score) v /= 2.0;  // every unordered pair was seen from both ends
  return finish(StructuralMetric::Betweenness, std::move(score));
}

StructuralScores electrical_betweenness(const GridCase& grid, const StructuralOptions& opts) {
  const auto sf = shift_factors(grid, opts);
  std::vector<double> score(grid.num_branches(), 0.0);
  for_each_transfer(grid, sf, opts, [&](int i, int j, double wi, double wj) {
    const double weight = std::sqrt(wi * wj);
    for (int l = 0; l < grid.num_branches(); ++l)
      score[l] += weight * std::abs(sf.at(l, i) - sf.at(l, j));
  });
  return finish(StructuralMetric::Electrical, std::move(score));
}

StructuralScores extended_betweenness(const GridCase& grid, const StructuralOptions& opts) {
  const auto sf = shift_factors(grid, opts);
  const int nl = grid.num_branches();
  std::vector<double> pos(nl, 0.0), neg(nl, 0.0);
  for_each_transfer(grid, sf, opts, [&](int i, int j, double, double) {
    double transfer = INFINITY;
    for (int l = 0; l < nl; ++l) {
      const double d = std::abs(sf.at(l, i) - sf.at(l, j));
      if (d >= 1e-9) transfer = std::min(transfer, grid.branches[l].f_lim1 / d);
    }
    if (!std::isfinite(transfer)) return;
    for (int l = 0; l < nl; ++l) {
      const double d = sf.at(l, i) - sf.at(l, j);
      if (d > 0.0)
        pos[l] += d * transfer;
      else
        neg[l] -= d * transfer;
    }
  });
  std::vector<double> score(nl);
  for (int l = 0; l < nl; ++l) score[l] = std::max(pos[l], neg[l]);
  return finish(StructuralMetric::Extended, std::move(score));
}

StructuralScores structural_scores(const GridCase& grid, StructuralMetric metric,
                                   const StructuralOptions& opts) {
  switch (metric) {
    case StructuralMetric::Betweenness: return betweenness(grid);
    case StructuralMetric::Electrical: return electrical_betweenness(grid, opts);
    case StructuralMetric::Extended: return extended_betweenness(grid, opts);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown structural metric");
}

void write_scores_csv(const StructuralScores& s, const GridCase& grid,
                      const std::filesystem::path& path) {
  if (static_cast<int>(s.score.size()) != grid.num_branches())
    throw Error(ErrorCode::Mismatch, "score size does not match the case branch count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << "rank,branch,from,to," << to_string(s.metric) << '\n';
  for (size_t pos = 0; pos < s.order.size(); ++pos) {
    const int l = s.order[pos];
    const auto& br = grid.branches[l];
    out << pos + 1 << ',' << l + 1 << ',' << grid.buses[br.from].id << ','
        << grid.buses[br.to].id << ',' << fmt(s.score[l]) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

}  // namespace gridcfc
