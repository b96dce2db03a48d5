#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gridcfc/grid_model.hpp"

namespace gridcfc {

enum class StructuralMetric { Betweenness, Electrical, Extended };
StructuralMetric parse_structural_metric(const std::string& tag);  // b1 | b2 | b3
const char* to_string(StructuralMetric metric);

struct StructuralScores {
  StructuralMetric metric = StructuralMetric::Betweenness;
  std::vector<double> score;  // per branch
  std::vector<int> order;     // descending score, ties by index
};

// DC injection shift factors: flow (p.u. of the injection) on each branch for a
// unit injection at a bus withdrawn at its island's slack bus.
struct ShiftFactors {
  int n_branches = 0;
  int n_buses = 0;
  std::vector<double> f;          // row-major branch x bus
  std::vector<int> slack_of_bus;  // slack bus of the bus's island
  std::vector<int> island_of_bus;

  double at(int branch, int bus) const { return f[static_cast<size_t>(branch) * n_buses + bus]; }
};

struct StructuralOptions {
  // Weight generator buses by current output instead of capacity.
  bool realtime_output = false;
  // Forces the slack of the island containing this bus position.
  int slack_bus = -1;
};

// Slack per island: the bus with the largest installed capacity. Throws
// Error(Numerical) for a singular reduced susceptance matrix.
ShiftFactors shift_factors(const GridCase& grid, const StructuralOptions& opts = {});

// Shortest-path (hop count) betweenness over unordered bus pairs; parallel
// branches are distinct paths.
StructuralScores betweenness(const GridCase& grid);
StructuralScores electrical_betweenness(const GridCase& grid, const StructuralOptions& opts = {});
StructuralScores extended_betweenness(const GridCase& grid, const StructuralOptions& opts = {});
StructuralScores structural_scores(const GridCase& grid, StructuralMetric metric,
                                   const StructuralOptions& opts = {});

// rank,branch,from,to,score
void write_scores_csv(const StructuralScores& s, const GridCase& grid,
                      const std::filesystem::path& path);

}  // namespace gridcfc
