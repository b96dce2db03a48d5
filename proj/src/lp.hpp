#pragma once

// Small dense linear programs, solved by a bounded-variable two-phase
// primal simplex. Sized for the few dozen rows of a dispatch step.

#include <limits>
#include <vector>

namespace gridcfc::detail {

enum class RowSense { LessEqual, GreaterEqual, Equal };

struct LpRow {
  std::vector<double> coef;  // dense, one per variable
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
};

// minimize cost·x  s.t.  rows, lower <= x <= upper (lower finite).
struct LinearProgram {
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<LpRow> rows;

  int num_vars() const { return static_cast<int>(cost.size()); }
  int add_var(double c, double lo, double hi);
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  int iterations = 0;
};

inline constexpr double kLpInf = std::numeric_limits<double>::infinity();

LpResult solve_lp(const LinearProgram& lp);

}  // namespace gridcfc::detail
