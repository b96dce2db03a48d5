#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gridcfc/grid_model.hpp"
#include "gridcfc/interaction.hpp"

namespace gridcfc {

// Square nonnegative matrix, row-major, diagonal ignored.
struct WeightMatrix {
  int n = 0;
  std::vector<double> w;

  double at(int i, int j) const { return w[static_cast<size_t>(i) * n + j]; }
  double& at(int i, int j) { return w[static_cast<size_t>(i) * n + j]; }
};

WeightMatrix to_weights(const InteractionMatrix& m);

// Replaces off-diagonal zeros with `floor`; a nonpositive floor means
// 1e-6 times the largest off-diagonal entry (1e-6 if the matrix is zero).
WeightMatrix regularize(const WeightMatrix& w, double floor = 0.0);

bool strongly_connected(const WeightMatrix& w);

struct RankingResult {
  std::vector<double> auth;
  std::vector<double> hub;
  std::vector<double> k;
  std::vector<int> order;  // branch indices by descending k, ties by index
  int iterations = 0;
  bool converged = false;
  std::vector<double> residuals;  // stopping measure per iteration
};

struct HitsOptions {
  double tol = 1e-5;
  int max_iter = 1000;
};

// Weighted HITS: authorities collect hub mass spread over each source's
// out-weights, hubs collect fresh authority mass spread over each target's
// in-weights; both L2-normalised every sweep. A result that hit max_iter is
// returned with converged = false.
RankingResult weighted_hits(const WeightMatrix& w, const HitsOptions& opts = {});

// Descending order of `score` with ties broken by ascending index.
std::vector<int> order_by_score(const std::vector<double>& score);

enum class RankGroup { Top, Middle, Bottom };
RankGroup parse_rank_group(const std::string& tag);
const char* to_string(RankGroup group);

// Middle group starts at the 1-based rank `middle_start`.
std::vector<int> select_group(const std::vector<int>& order, RankGroup group, int size,
                              int middle_start = 15);

void write_ranking_csv(const RankingResult& r, const GridCase& grid,
                       const std::filesystem::path& path);

// Branch order read back from a ranking or structural scores CSV (second
// column, 1-based branch ids, listed by rank).
std::vector<int> read_order_csv(const std::filesystem::path& path, int n_branches);

}  // namespace gridcfc
