#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcfc/acpf.hpp"
#include "gridcfc/dispatch.hpp"
#include "gridcfc/grid_model.hpp"

namespace gridcfc {

enum class OutageCause { Initial, Overload, Hidden, Emergency };

const char* to_string(OutageCause cause);
OutageCause parse_outage_cause(const std::string& tag);

struct OutageEvent {
  int branch = 0;  // index into GridCase::branches
  int stage = 0;
  int island = 0;  // island id when the branch failed
  OutageCause cause = OutageCause::Initial;
};

// Load shed while one island was processed in one stage.
struct StageLoss {
  int island = 0;
  int stage = 0;
  double mw = 0.0;
};

struct CascadeRecord {
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  std::vector<OutageEvent> events;  // ascending stage
  std::vector<StageLoss> losses;    // one entry per processed (island, stage)
  std::vector<int> lineage;         // parent of every island id, -1 for roots
  double total_loss = 0.0;          // MW
  int stages = 0;                   // last stage index
  bool cap_hit = false;
  int collapses = 0;  // island solves that needed the shedding fallback

  bool is_descendant_or_self(int island, int ancestor) const;
};

enum class InitialOutagePolicy { UniformN2, Independent };
enum class DispatchPolicy { EveryQuietStage, OncePerIsland };

const char* to_string(InitialOutagePolicy policy);
InitialOutagePolicy parse_initial_policy(const std::string& tag);
const char* to_string(DispatchPolicy policy);
DispatchPolicy parse_dispatch_policy(const std::string& tag);

struct SimulationConfig {
  std::uint64_t n_samples = 1000;
  std::uint64_t master_seed = 1;
  InitialOutagePolicy initial_policy = InitialOutagePolicy::UniformN2;
  std::vector<double> initial_probability;  // per branch, Independent policy only
  DispatchPolicy dispatch_policy = DispatchPolicy::EveryQuietStage;
  int max_stages = 50;
  // Dispatch the pre-contingency state to a secure point before sampling.
  bool secure_base = true;
  int workers = 1;
  PowerFlowOptions power_flow;
  DispatchOptions dispatch;
};

void validate(const SimulationConfig& config, const GridCase& grid);

// Tripping probability, linear between the two ratings.
double branch_failure_prob(double flow_mw, double f_lim1, double f_lim2);

// Counter-based random numbers: every draw is a pure function of the key, so
// plans compared under common random numbers see identical draws for the same
// (sample, stage, branch) whatever else differs.
class DrawStream {
 public:
  explicit DrawStream(std::uint64_t seed) : seed_(seed) {}
  std::uint64_t seed() const { return seed_; }
  // Uniform on [0, 1).
  double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const;
  std::uint64_t bits(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const;

 private:
  std::uint64_t seed_;
};

std::uint64_t sample_seed(std::uint64_t master_seed, std::uint64_t sample_index);

// Uniform unordered pair (N-2) or independent Bernoulli draws with empty draws
// rejected (Independent).
std::vector<int> sample_initial_outages(const GridCase& grid, const SimulationConfig& config,
                                        const DrawStream& rng);

// Overload trips over every in-service branch of the island, then hidden
// failures over `exposed` branches that did not already trip.
std::vector<OutageEvent> sample_sequent_outages(const GridCase& grid, const Topology& topo,
                                                int island, const SystemState& state,
                                                const std::vector<int>& exposed, int stage,
                                                const DrawStream& rng);

// Pre-contingency operating point shared by every sample of a batch.
struct OperatingPoint {
  GridCase grid;
  Topology topo;
  SystemState state;
  double served_mw = 0.0;  // L_T
  std::string case_hash;
  std::vector<std::vector<int>> branches_at_bus;
};

// Solves (and, when configured, secures) the base case. Throws
// Error(Numerical) if no usable operating point exists.
OperatingPoint prepare_operating_point(const GridCase& grid, const SimulationConfig& config);

CascadeRecord run_cascade(const OperatingPoint& op, const SimulationConfig& config,
                          std::uint64_t sample_index);

struct RiskSummary {
  std::uint64_t n_samples = 0;
  double cfr_mw = 0.0;  // mean total loss
  double std_mw = 0.0;
  double ci95_half_width = 0.0;
  double max_loss_mw = 0.0;
  std::uint64_t cap_hits = 0;
  std::uint64_t collapses = 0;
};

RiskSummary summarize(const std::vector<CascadeRecord>& records);

struct BatchResult {
  std::string case_hash;
  std::string case_name;
  double served_mw = 0.0;  // L_T
  std::uint64_t master_seed = 0;
  std::vector<CascadeRecord> records;  // ascending index
  RiskSummary summary;
};

// Samples [first, first + count) with `config.workers` threads; the result does
// not depend on the worker count.
BatchResult run_batch(const OperatingPoint& op, const SimulationConfig& config,
                      std::uint64_t first = 0);
BatchResult run_batch(const GridCase& grid, const SimulationConfig& config);

nlohmann::json record_to_json(const CascadeRecord& record);
CascadeRecord record_from_json(const nlohmann::json& j);

// Line-delimited JSON: one header object, then one record per line.
void write_batch(const BatchResult& batch, const std::filesystem::path& path);
BatchResult read_batch(const std::filesystem::path& path);

}  // namespace gridcfc
