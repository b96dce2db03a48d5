#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "lp.hpp"

using namespace gridcfc::detail;

namespace {

// Enumerates every vertex of the feasible box-polytope: each choice of n
// tight constraints among rows and bounds.
struct Brute {
  bool feasible = false;
  double best = kLpInf;
};

bool satisfies(const LinearProgram& lp, const Eigen::VectorXd& x) {
  const double tol = 1e-7;
  for (int j = 0; j < lp.num_vars(); ++j)
    if (x[j] < lp.lower[j] - tol || x[j] > lp.upper[j] + tol) return false;
  for (const auto& r : lp.rows) {
    double v = 0.0;
    for (int j = 0; j < lp.num_vars(); ++j) v += r.coef[j] * x[j];
    if (r.sense == RowSense::LessEqual && v > r.rhs + tol) return false;
    if (r.sense == RowSense::GreaterEqual && v < r.rhs - tol) return false;
    if (r.sense == RowSense::Equal && std::abs(v - r.rhs) > tol) return false;
  }
  return true;
}

Brute brute_force(const LinearProgram& lp) {
  const int n = lp.num_vars();
  std::vector<std::pair<Eigen::VectorXd, double>> planes;
  for (const auto& r : lp.rows) {
    Eigen::VectorXd a(n);
    for (int j = 0; j < n; ++j) a[j] = r.coef[j];
    planes.emplace_back(a, r.rhs);
  }
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(n, j);
    planes.emplace_back(e, lp.lower[j]);
    planes.emplace_back(e, lp.upper[j]);
  }
  const int p = static_cast<int>(planes.size());
  Brute out;
  std::vector<int> pick(n);
  for (int k = 0; k < n; ++k) pick[k] = k;
  for (;;) {
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd b(n);
    for (int k = 0; k < n; ++k) {
      A.row(k) = planes[pick[k]].first.transpose();
      b[k] = planes[pick[k]].second;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() == n) {
      const Eigen::VectorXd x = lu.solve(b);
      if (satisfies(lp, x)) {
        double obj = 0.0;
        for (int j = 0; j < n; ++j) obj += lp.cost[j] * x[j];
        out.feasible = true;
        out.best = std::min(out.best, obj);
      }
    }
    int k = n - 1;
    while (k >= 0 && pick[k] == p - n + k) --k;
    if (k < 0) break;
    ++pick[k];
    for (int i = k + 1; i < n; ++i) pick[i] = pick[i - 1] + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("textbook LP") {
  // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3
  LinearProgram lp;
  lp.add_var(-3.0, 0.0, 3.0);
  lp.add_var(-2.0, 0.0, kLpInf);
  lp.rows.push_back({{1.0, 1.0}, RowSense::LessEqual, 4.0});
  lp.rows.push_back({{1.0, 3.0}, RowSense::LessEqual, 6.0});
  auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.x[0] == doctest::Approx(3.0));
  CHECK(r.x[1] == doctest::Approx(1.0));
  CHECK(r.objective == doctest::Approx(-11.0));
}

TEST_CASE("infeasible and unbounded programs are reported") {
  LinearProgram a;
  a.add_var(1.0, 0.0, 1.0);
  a.rows.push_back({{1.0}, RowSense::GreaterEqual, 2.0});
  CHECK(solve_lp(a).status == LpStatus::Infeasible);

  LinearProgram b;
  b.add_var(-1.0, 0.0, kLpInf);
  b.add_var(0.0, 0.0, 1.0);
  b.rows.push_back({{1.0, -1.0}, RowSense::GreaterEqual, 0.0});
  CHECK(solve_lp(b).status == LpStatus::Unbounded);
}

TEST_CASE("equality rows and negative lower bounds") {
  LinearProgram lp;
  lp.add_var(1.0, -5.0, 5.0);
  lp.add_var(2.0, -5.0, 5.0);
  lp.rows.push_back({{1.0, 1.0}, RowSense::Equal, 1.0});
  auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.x[0] == doctest::Approx(5.0));
  CHECK(r.x[1] == doctest::Approx(-4.0));
}

TEST_CASE("random programs match vertex enumeration") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::uniform_int_distribution<int> nvar(1, 4), nrow(0, 4), sense(0, 5);
  int feasible = 0, infeasible = 0;
  for (int trial = 0; trial < 500; ++trial) {
    LinearProgram lp;
    const int n = nvar(rng);
    for (int j = 0; j < n; ++j) {
      const double lo = std::round(coef(rng));
      lp.add_var(coef(rng), lo, lo + 1.0 + std::abs(std::round(coef(rng))));
    }
    const int m = nrow(rng);
    for (int r = 0; r < m; ++r) {
      LpRow row;
      for (int j = 0; j < n; ++j) row.coef.push_back(trial % 7 == 0 ? std::round(coef(rng)) : coef(rng));
      const int s = sense(rng);
      row.sense = s < 3 ? RowSense::LessEqual : (s < 5 ? RowSense::GreaterEqual : RowSense::Equal);
      row.rhs = coef(rng);
      lp.rows.push_back(row);
    }
    const auto oracle = brute_force(lp);
    const auto r = solve_lp(lp);
    if (!oracle.feasible) {
      CHECK(r.status == LpStatus::Infeasible);
      ++infeasible;
      continue;
    }
    ++feasible;
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.objective == doctest::Approx(oracle.best).epsilon(1e-7).scale(1.0));
    Eigen::VectorXd x(n);
    for (int j = 0; j < n; ++j) x[j] = r.x[j];
    CHECK(satisfies(lp, x));
  }
  CHECK(feasible > 100);
  CHECK(infeasible > 10);
}
