#include "gridcfc/ranking.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gridcfc/error.hpp"

namespace gridcfc {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  if (s > 0.0)
    for (double& x : v) x /= s;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

WeightMatrix to_weights(const InteractionMatrix& m) { return {m.n_branches, m.w}; }

WeightMatrix regularize(const WeightMatrix& w, double floor) {
  if (floor <= 0.0) {
    double top = 0.0;
    for (int i = 0; i < w.n; ++i)
      for (int j = 0; j < w.n; ++j)
        if (i != j) top = std::max(top, w.at(i, j));
    floor = top > 0.0 ? 1e-6 * top : 1e-6;
  }
  WeightMatrix out = w;
  for (int i = 0; i < w.n; ++i)
    for (int j = 0; j < w.n; ++j) {
      if (i == j)
        out.at(i, j) = 0.0;
      else if (!(out.at(i, j) > 0.0))
        out.at(i, j) = floor;
    }
  return out;
}

bool strongly_connected(const WeightMatrix& w) {
  if (w.n <= 1) return true;
  auto reach_all = [&](bool forward) {
    std::vector<char> seen(w.n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < w.n; ++v) {
        const double e = forward ? w.at(u, v) : w.at(v, u);
        if (v != u && e > 0.0 && !seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == w.n;
  };
  return reach_all(true) && reach_all(false);
}

RankingResult weighted_hits(const WeightMatrix& w, const HitsOptions& opts) {
  if (!(opts.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "HITS tolerance must be positive");
  if (opts.max_iter < 1) throw Error(ErrorCode::InvalidArgument, "HITS needs max_iter >= 1");
  const int n = w.n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && !(w.at(i, j) >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "HITS weights must be nonnegative");

  std::vector<double> out_sum(n, 0.0), in_sum(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        out_sum[i] += w.at(i, j);
        in_sum[j] += w.at(i, j);
      }

  RankingResult r;
  r.auth.assign(n, 1.0);
  r.hub.assign(n, 1.0);
  std::vector<double> auth(n), hub(n);
  for (int it = 1; it <= opts.max_iter; ++it) {
    std::fill(auth.begin(), auth.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      if (out_sum[j] <= 0.0) continue;
      const double share = r.hub[j] / out_sum[j];
      for (int i = 0; i < n; ++i)
        if (i != j) auth[i] += share * w.at(j, i);
    }
    normalize(auth);
    std::fill(hub.begin(), hub.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      if (in_sum[j] <= 0.0) continue;
      const double share = auth[j] / in_sum[j];
      for (int i = 0; i < n; ++i)
        if (i != j) hub[i] += share * w.at(i, j);
    }
    normalize(hub);
    const double residual = max_abs_diff(auth, r.auth) + max_abs_diff(hub, r.hub);
    r.auth.swap(auth);
    r.hub.swap(hub);
    r.iterations = it;
    r.residuals.push_back(residual);
    if (residual < opts.tol) {
      r.converged = true;
      break;
    }
  }
  r.k.resize(n);
  for (int i = 0; i < n; ++i) r.k[i] = (r.auth[i] + r.hub[i]) / 2.0;
  r.order = order_by_score(r.k);
  return r;
}

std::vector<int> order_by_score(const std::vector<double>& score) {
  std::vector<int> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return score[a] > score[b]; });
  return order;
}

RankGroup parse_rank_group(const std::string& tag) {
  if (tag == "top") return RankGroup::Top;
  if (tag == "middle") return RankGroup::Middle;
  if (tag == "bottom") return RankGroup::Bottom;
  throw Error(ErrorCode::InvalidArgument,
              "unknown rank group '" + tag + "' (expected top, middle or bottom)");
}

const char* to_string(RankGroup group) {
  switch (group) {
    case RankGroup::Top: return "top";
    case RankGroup::Middle: return "middle";
    case RankGroup::Bottom: return "bottom";
  }
  return "?";
}

std::vector<int> select_group(const std::vector<int>& order, RankGroup group, int size,
                              int middle_start) {
  const int n = static_cast<int>(order.size());
  if (size < 0 || size > n)
    throw Error(ErrorCode::InvalidArgument, "group size " + std::to_string(size) +
                                                " outside 0.." + std::to_string(n));
  int first = 0;
  switch (group) {
    case RankGroup::Top: first = 0; break;
    case RankGroup::Bottom: first = n - size; break;
    case RankGroup::Middle:
      first = middle_start - 1;
      if (middle_start < 1 || first + size > n)
        throw Error(ErrorCode::InvalidArgument,
                    "middle window at rank " + std::to_string(middle_start) + " of size " +
                        std::to_string(size) + " exceeds " + std::to_string(n) + " branches");
      break;
  }
  return {order.begin() + first, order.begin() + first + size};
}

void write_ranking_csv(const RankingResult& r, const GridCase& grid,
                       const std::filesystem::path& path) {
  if (static_cast<int>(r.k.size()) != grid.num_branches())
    throw Error(ErrorCode::Mismatch, "ranking size does not match the case branch count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << "rank,branch,from,to,auth,hub,K\n";
  for (size_t pos = 0; pos < r.order.size(); ++pos) {
    const int l = r.order[pos];
    const auto& br = grid.branches[l];
    out << pos + 1 << ',' << l + 1 << ',' << grid.buses[br.from].id << ','
        << grid.buses[br.to].id << ',' << fmt(r.auth[l]) << ',' << fmt(r.hub[l]) << ','
        << fmt(r.k[l]) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

std::vector<int> read_order_csv(const std::filesystem::path& path, int n_branches) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open ranking file '" + path.string() + "'");
  std::string line;
  std::getline(in, line);  // header
  std::vector<int> order;
  std::vector<char> seen(n_branches, 0);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    int id = 0;
    const char* b = line.data() + (c1 == std::string::npos ? 0 : c1 + 1);
    const char* e = line.data() + (c2 == std::string::npos ? line.size() : c2);
    auto res = std::from_chars(b, e, id);
    if (c1 == std::string::npos || res.ec != std::errc() || res.ptr != e)
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) +
                                        ": expected a branch id in the second column");
    if (id < 1 || id > n_branches || seen[id - 1])
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) +
                                        ": branch id " + std::to_string(id) +
                                        " out of range or repeated");
    seen[id - 1] = 1;
    order.push_back(id - 1);
  }
  if (static_cast<int>(order.size()) != n_branches)
    throw Error(ErrorCode::Mismatch, path.string() + " ranks " + std::to_string(order.size()) +
                                         " branches, the case has " +
                                         std::to_string(n_branches));
  return order;
}

}  // namespace gridcfc
