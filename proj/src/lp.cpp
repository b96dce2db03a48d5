#include "lp.hpp"

#include <algorithm>
#include <cmath>

#include "gridcfc/error.hpp"

namespace gridcfc::detail {

int LinearProgram::add_var(double c, double lo, double hi) {
  cost.push_back(c);
  lower.push_back(lo);
  upper.push_back(hi);
  for (auto& r : rows) r.coef.push_back(0.0);
  return num_vars() - 1;
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;

struct Tableau {
  int m = 0, cols = 0;
  std::vector<double> t;      // m x cols, B^-1 A
  std::vector<double> beta;   // basic values
  std::vector<double> upper;  // per column, shifted upper bound
  std::vector<double> cost;   // per column, current phase
  std::vector<double> red;    // reduced costs
  std::vector<int> basis;     // column of each row
  std::vector<int> row_of;    // row of a basic column, -1 otherwise
  std::vector<char> at_upper;
  std::vector<char> blocked;  // may not enter

  double& at(int r, int c) { return t[static_cast<size_t>(r) * cols + c]; }

  double value(int c) const {
    if (row_of[c] >= 0) return beta[row_of[c]];
    return at_upper[c] ? upper[c] : 0.0;
  }

  void price() {
    red = cost;
    for (int r = 0; r < m; ++r) {
      const double cb = cost[basis[r]];
      if (cb == 0.0) continue;
      const double* row = &t[static_cast<size_t>(r) * cols];
      for (int c = 0; c < cols; ++c) red[c] -= cb * row[c];
    }
  }

  void pivot(int r, int c) {
    double* prow = &t[static_cast<size_t>(r) * cols];
    const double inv = 1.0 / prow[c];
    for (int k = 0; k < cols; ++k) prow[k] *= inv;
    prow[c] = 1.0;
    for (int i = 0; i < m; ++i) {
      if (i == r) continue;
      double* row = &t[static_cast<size_t>(i) * cols];
      const double f = row[c];
      if (f == 0.0) continue;
      for (int k = 0; k < cols; ++k) row[k] -= f * prow[k];
      row[c] = 0.0;
    }
    const double f = red[c];
    if (f != 0.0) {
      for (int k = 0; k < cols; ++k) red[k] -= f * prow[k];
      red[c] = 0.0;
    }
    row_of[basis[r]] = -1;
    basis[r] = c;
    row_of[c] = r;
  }

  // Runs the simplex on the current cost vector.
  LpStatus optimize(int max_iter, int& iterations) {
    price();
    int degenerate = 0;
    for (;;) {
      if (iterations >= max_iter) return LpStatus::IterationLimit;
      const bool bland = degenerate > 50;
      int enter = -1;
      double best = 0.0;
      for (int c = 0; c < cols; ++c) {
        if (row_of[c] >= 0 || blocked[c]) continue;
        double gain = 0.0;
        if (!at_upper[c] && red[c] < -kCostTol && upper[c] > 0.0) gain = -red[c];
        if (at_upper[c] && red[c] > kCostTol) gain = red[c];
        if (gain <= 0.0) continue;
        if (bland) {
          enter = c;
          break;
        }
        if (gain > best) {
          best = gain;
          enter = c;
        }
      }
      if (enter < 0) return LpStatus::Optimal;
      ++iterations;

      const double dir = at_upper[enter] ? -1.0 : 1.0;
      double step = upper[enter];
      int leave = -1;
      bool leave_to_upper = false;
      for (int r = 0; r < m; ++r) {
        const double alpha = dir * at(r, enter);
        if (alpha > kPivotTol) {
          const double lim = std::max(beta[r], 0.0) / alpha;
          if (lim < step) {
            step = lim;
            leave = r;
            leave_to_upper = false;
          }
        } else if (alpha < -kPivotTol && std::isfinite(upper[basis[r]])) {
          const double lim = std::max(upper[basis[r]] - beta[r], 0.0) / -alpha;
          if (lim < step) {
            step = lim;
            leave = r;
            leave_to_upper = true;
          }
        }
      }
      if (std::isinf(step)) return LpStatus::Unbounded;
      degenerate = step <= 1e-12 ? degenerate + 1 : 0;

      for (int r = 0; r < m; ++r) beta[r] -= dir * step * at(r, enter);
      if (leave < 0) {
        at_upper[enter] = !at_upper[enter];
        continue;
      }
      const double entering_value = (at_upper[enter] ? upper[enter] : 0.0) + dir * step;
      const int out = basis[leave];
      at_upper[out] = leave_to_upper;
      at_upper[enter] = 0;
      pivot(leave, enter);
      beta[leave] = entering_value;
    }
  }
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp) {
  const int n = lp.num_vars();
  const int m = static_cast<int>(lp.rows.size());
  if (static_cast<int>(lp.lower.size()) != n || static_cast<int>(lp.upper.size()) != n)
    throw Error(ErrorCode::InvalidArgument, "lp: bound vectors do not match the variable count");
  for (int j = 0; j < n; ++j)
    if (!std::isfinite(lp.lower[j]) || lp.upper[j] < lp.lower[j])
      throw Error(ErrorCode::InvalidArgument, "lp: variable " + std::to_string(j) + " has bad bounds");

  // Every structural starts at the point of its range nearest zero: x = shift
  // + dir·y with y >= 0, plus a negative part when the range straddles zero.
  // Then one slack per inequality, and an artificial for each row that has no
  // usable starting basic column.
  std::vector<int> neg_col(n, -1), slack_col(m, -1), art_col(m, -1);
  std::vector<double> shift(n), dir(n, 1.0);
  int cols = n;
  for (int j = 0; j < n; ++j) {
    if (lp.lower[j] < 0.0 && lp.upper[j] > 0.0) {
      neg_col[j] = cols++;
    } else if (lp.upper[j] <= 0.0) {
      shift[j] = lp.upper[j];
      dir[j] = -1.0;
    } else {
      shift[j] = lp.lower[j];
    }
  }
  for (int r = 0; r < m; ++r) {
    if (static_cast<int>(lp.rows[r].coef.size()) != n)
      throw Error(ErrorCode::InvalidArgument, "lp: row " + std::to_string(r) + " has wrong width");
    if (lp.rows[r].sense != RowSense::Equal) slack_col[r] = cols++;
  }

  // Row of the single nonzero of each unsplit structural column, if any.
  std::vector<int> singleton(n, -1);
  {
    std::vector<int> count(n, 0);
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < n; ++j)
        if (lp.rows[r].coef[j] != 0.0) {
          ++count[j];
          singleton[j] = r;
        }
    for (int j = 0; j < n; ++j)
      if (count[j] != 1 || neg_col[j] >= 0) singleton[j] = -1;
  }

  std::vector<double> rhs(m), sign(m);
  std::vector<int> start(m, -1);
  std::vector<char> taken(n, 0);
  for (int r = 0; r < m; ++r) {
    const auto& row = lp.rows[r];
    rhs[r] = row.rhs;
    for (int j = 0; j < n; ++j) rhs[r] -= row.coef[j] * shift[j];
    sign[r] = rhs[r] < 0.0 ? -1.0 : 1.0;
    if (slack_col[r] >= 0 && sign[r] * (row.sense == RowSense::LessEqual ? 1.0 : -1.0) > 0.0) {
      start[r] = slack_col[r];
      continue;
    }
    for (int j = 0; j < n; ++j) {
      if (singleton[j] != r || taken[j]) continue;
      const double a = sign[r] * dir[j] * row.coef[j];
      if (a > 0.0 && std::abs(rhs[r]) / a <= lp.upper[j] - lp.lower[j]) {
        start[r] = j;
        taken[j] = 1;
        break;
      }
    }
    if (start[r] < 0) art_col[r] = cols++;
  }

  Tableau tab;
  tab.m = m;
  tab.cols = cols;
  tab.t.assign(static_cast<size_t>(m) * cols, 0.0);
  tab.beta.assign(m, 0.0);
  tab.upper.assign(cols, kLpInf);
  tab.cost.assign(cols, 0.0);
  tab.basis.assign(m, -1);
  tab.row_of.assign(cols, -1);
  tab.at_upper.assign(cols, 0);
  tab.blocked.assign(cols, 0);
  for (int j = 0; j < n; ++j) {
    tab.upper[j] = neg_col[j] >= 0 ? lp.upper[j] : lp.upper[j] - lp.lower[j];
    if (neg_col[j] >= 0) tab.upper[neg_col[j]] = -lp.lower[j];
  }

  bool need_phase1 = false;
  for (int r = 0; r < m; ++r) {
    const auto& row = lp.rows[r];
    double* t = &tab.t[static_cast<size_t>(r) * cols];
    for (int j = 0; j < n; ++j) {
      t[j] = sign[r] * dir[j] * row.coef[j];
      if (neg_col[j] >= 0) t[neg_col[j]] = -sign[r] * row.coef[j];
    }
    if (slack_col[r] >= 0)
      t[slack_col[r]] = sign[r] * (row.sense == RowSense::LessEqual ? 1.0 : -1.0);
    tab.beta[r] = std::abs(rhs[r]);
    if (start[r] >= 0) {
      const double inv = 1.0 / t[start[r]];
      for (int c = 0; c < cols; ++c) t[c] *= inv;
      tab.beta[r] *= inv;
      tab.basis[r] = start[r];
    } else {
      t[art_col[r]] = 1.0;
      tab.basis[r] = art_col[r];
      tab.cost[art_col[r]] = 1.0;
      need_phase1 = true;
    }
    tab.row_of[tab.basis[r]] = r;
  }

  LpResult res;
  const int max_iter = 50 * (m + cols) + 100;
  if (need_phase1) {
    const auto st = tab.optimize(max_iter, res.iterations);
    if (st == LpStatus::IterationLimit) {
      res.status = st;
      return res;
    }
    double infeas = 0.0;
    for (int r = 0; r < m; ++r)
      if (art_col[r] >= 0) infeas += tab.value(art_col[r]);
    if (infeas > 1e-7 * (1.0 + m)) {
      res.status = LpStatus::Infeasible;
      return res;
    }
  }
  for (int r = 0; r < m; ++r)
    if (art_col[r] >= 0) {
      tab.blocked[art_col[r]] = 1;
      tab.upper[art_col[r]] = 0.0;
    }
  std::fill(tab.cost.begin(), tab.cost.end(), 0.0);
  for (int j = 0; j < n; ++j) {
    tab.cost[j] = dir[j] * lp.cost[j];
    if (neg_col[j] >= 0) tab.cost[neg_col[j]] = -lp.cost[j];
  }
  res.status = tab.optimize(max_iter, res.iterations);
  if (res.status != LpStatus::Optimal) return res;

  res.x.resize(n);
  res.objective = 0.0;
  for (int j = 0; j < n; ++j) {
    double v = shift[j] + dir[j] * tab.value(j);
    if (neg_col[j] >= 0) v -= tab.value(neg_col[j]);
    res.x[j] = std::clamp(v, lp.lower[j], lp.upper[j]);
    res.objective += lp.cost[j] * res.x[j];
  }
  return res;
}

}  // namespace gridcfc::detail
