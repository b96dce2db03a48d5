#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridcfc/cascade.hpp"
#include "gridcfc/grid_model.hpp"
#include "gridcfc/ranking.hpp"

namespace gridcfc {

struct UpgradePlan {
  std::vector<int> branches;  // branch indices
  double delta_c_mw = 300.0;
};

// Raises both ratings of every planned branch by delta_c_mw.
GridCase apply_upgrade(const GridCase& grid, const UpgradePlan& plan);

struct RiskReport {
  std::uint64_t n_samples = 0;
  double served_mw = 0.0;
  double cfr_mw = 0.0;
  double std_mw = 0.0;
  double ci95_half_width = 0.0;
  double max_loss_mw = 0.0;
  // Loss mass per blackout size band (< 10 %, 10-30 %, > 30 % of served load),
  // each divided by n_samples so the three add up to cfr_mw.
  double risk_small = 0.0;
  double risk_medium = 0.0;
  double risk_large = 0.0;
};

// Throws Error(Empty) for an empty batch.
RiskReport risk_report(const std::vector<CascadeRecord>& records, double served_mw);

// Runs plans on one case with a shared seed set, so every plan sees the same
// random draws per sample. Every plan starts from the base state secured on the
// original grid. Plans with the same branch set run once.
class UpgradeExperiment {
 public:
  UpgradeExperiment(GridCase grid, SimulationConfig config, double delta_c_mw);

  const GridCase& grid() const { return grid_; }
  const SimulationConfig& config() const { return config_; }
  double delta_c_mw() const { return delta_c_; }

  // Called before each uncached plan runs.
  std::function<void(const std::vector<int>& branches)> on_plan;
  // When set, every simulated plan's batch is written there.
  std::filesystem::path batch_dir;

  const RiskReport& evaluate(std::vector<int> branches);
  const BatchResult& batch(std::vector<int> branches);

 private:
  GridCase grid_;
  SimulationConfig config_;
  double delta_c_;
  std::optional<OperatingPoint> base_;
  std::map<std::vector<int>, BatchResult> batches_;
  std::map<std::vector<int>, RiskReport> reports_;
};

struct SweepRow {
  std::string group;
  int size = 0;
  std::vector<int> branches;
  RiskReport report;
};

// Top, middle and bottom groups of `order` upgraded at every size.
std::vector<SweepRow> self_validate(UpgradeExperiment& exp, const std::vector<int>& order,
                                    const std::vector<int>& sizes, int middle_start = 15);

// Top group of each named ranking upgraded at every size.
std::vector<SweepRow> cross_validate(UpgradeExperiment& exp,
                                     const std::vector<std::pair<std::string, std::vector<int>>>& orders,
                                     const std::vector<int>& sizes);

const SweepRow& find_row(const std::vector<SweepRow>& rows, const std::string& group, int size);

// Two non-overlapping 95 % intervals with a below b.
bool separated_below(const RiskReport& a, const RiskReport& b);

// group,size,n_samples,served_mw,cfr,ci95,std,max_loss,risk_lt10,risk_10_30,risk_gt30,branches
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
// group,size,measure,value
void write_sweep_long_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
std::string sweep_bars(const std::vector<SweepRow>& rows, int width = 40);

}  // namespace gridcfc
