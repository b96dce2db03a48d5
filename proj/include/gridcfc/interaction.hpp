#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridcfc/cascade.hpp"
#include "gridcfc/grid_model.hpp"

namespace gridcfc {

struct InteractionParams {
  double k1 = 6.0;
  double k2 = 3.0;
  // Count load shed in the effect branch's own stage, before it tripped.
  bool loss_includes_own_stage = true;
};

// Dense branch-by-branch matrix of estimated interaction severities; entry
// (i, j) is the severity of failures of branch i causing failures of branch j.
struct InteractionMatrix {
  int n_branches = 0;
  std::uint64_t n_samples = 0;
  InteractionParams params;
  double served_mw = 0.0;
  std::string case_hash;
  std::vector<double> w;  // row-major

  double at(int i, int j) const { return w[static_cast<size_t>(i) * n_branches + j]; }
  double max_weight() const;
};

// Both events must come from `record`.
bool cause_effect(const CascadeRecord& record, const OutageEvent& cause,
                  const OutageEvent& effect);

// Shed MW in the effect's island and its descendants from the effect's stage on.
double downstream_loss(const CascadeRecord& record, const OutageEvent& effect,
                       bool include_own_stage = true);

// Branches failing in the same stage and island as `event`, itself included.
int co_failures(const CascadeRecord& record, const OutageEvent& event);

double severity(const CascadeRecord& record, const OutageEvent& cause, const OutageEvent& effect,
                const InteractionParams& params, double served_mw);

// Single pass over records; partial accumulators merge exactly like the
// concatenation of their inputs.
class InteractionAccumulator {
 public:
  InteractionAccumulator(int n_branches, double served_mw, std::string case_hash,
                         InteractionParams params = {});

  void add(const CascadeRecord& record);
  // Throws Error(Mismatch) when the batch comes from another case.
  void add(const BatchResult& batch);
  void merge(const InteractionAccumulator& other);
  std::uint64_t n_samples() const { return n_samples_; }
  // Throws Error(Empty) before any record was added.
  InteractionMatrix result() const;

 private:
  int n_;
  double served_mw_;
  std::string case_hash_;
  InteractionParams params_;
  std::uint64_t n_samples_ = 0;
  std::vector<double> sum_;
};

InteractionMatrix accumulate(const BatchResult& batch, int n_branches,
                             const InteractionParams& params = {});

// Edges with weight above `threshold`; optional per-branch node scores.
void write_edge_csv(const InteractionMatrix& w, const std::filesystem::path& path,
                    double threshold = 0.0);
void write_gexf(const InteractionMatrix& w, const GridCase& grid,
                const std::filesystem::path& path, double threshold = 0.0,
                const std::vector<double>* node_score = nullptr);

// Text checkpoint: a header line with the metadata, then one matrix row per line.
void write_matrix(const InteractionMatrix& w, const std::filesystem::path& path);
InteractionMatrix read_matrix(const std::filesystem::path& path);

}  // namespace gridcfc
