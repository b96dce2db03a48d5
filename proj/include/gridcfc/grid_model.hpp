#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gridcfc {

enum class BusType { PQ, PV, Ref };

struct Bus {
  int id = 0;  // external bus number as it appears in the case file
  BusType type = BusType::PQ;
  double gs = 0.0;  // shunt conductance, MW at 1 p.u.
  double bs = 0.0;  // shunt susceptance, MVAr at 1 p.u.
  double base_kv = 0.0;
  double v_min = 0.9;
  double v_max = 1.1;
  int area = 1;
};

// from/to are positions in GridCase::buses, not external ids.
struct Branch {
  int id = 0;  // dense 1..N
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_shunt = 0.0;
  double tap = 1.0;
  double shift_deg = 0.0;
  double f_lim1 = 0.0;  // MW
  double f_lim2 = 0.0;  // MW
  double hidden_failure_prob = 0.01;
  bool transformer = false;
};

struct Generator {
  int id = 0;
  int bus = 0;       // position in GridCase::buses
  double p = 0.0;    // initial set-point, MW
  double q = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double v_set = 1.0;
  // Share of island losses; negative means "proportional to p_max".
  double slack_coeff = -1.0;
};

struct Load {
  int id = 0;
  int bus = 0;  // position in GridCase::buses
  double p = 0.0;  // MW
  double q = 0.0;  // MVAr
};

struct GridCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Load> loads;

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_branches() const { return static_cast<int>(branches.size()); }
  double total_load_mw() const;
  // Position of the bus with external id `bus_id`, or -1.
  int bus_position(int bus_id) const;
  // "37(8-30)" style label used in exports.
  std::string branch_label(int branch_index) const;
};

// Throws Error(InvalidCase) listing every offending record.
void validate_case(const GridCase& grid);

enum class CaseFormat { Auto, Json, Matpower };
CaseFormat parse_case_format(const std::string& tag);

struct MatpowerOptions {
  double f_lim2_ratio = 1.5;         // used when rateC does not exceed rateA
  double hidden_failure_prob = 0.01;
  double unlimited_rating_mw = 9900.0;  // stands in for rateA == 0
};

GridCase parse_matpower(const std::string& text, const MatpowerOptions& opts = {});
GridCase case_from_json(const nlohmann::json& j);
nlohmann::json case_to_json(const GridCase& grid);

GridCase load_case(const std::filesystem::path& path, CaseFormat format = CaseFormat::Auto,
                   const MatpowerOptions& opts = {});
void save_case_json(const GridCase& grid, const std::filesystem::path& path);

// FNV-1a over the canonical JSON serialization, as 16 hex digits.
std::string case_hash(const GridCase& grid);

struct UniformLimits {
  double line_mw = 0.0;
  double xfmr_mw = 0.0;
};

struct ScaleOptions {
  double load_factor = 1.0;
  double limit_factor = 1.0;
  std::optional<UniformLimits> uniform_limits;
  // Emergency rating multiplier applied when uniform limits are set.
  double f_lim2_ratio = 1.5;
  // Rescale loads to this base total before applying load_factor.
  std::optional<double> base_total_load_mw;
  std::optional<double> hidden_failure_prob;
  std::optional<double> v_min;
  std::optional<double> v_max;
};

GridCase scale_case(const GridCase& grid, const ScaleOptions& opts);

struct Island {
  int id = 0;
  std::vector<int> buses;  // ascending positions
};

struct Topology {
  std::vector<char> in_service;   // per branch
  std::vector<int> island_of_bus;  // island id per bus
  std::vector<Island> islands;     // current components, ascending id
  std::vector<int> parent;         // lineage forest over every id ever issued; -1 for roots

  int next_id() const { return static_cast<int>(parent.size()); }
  const Island& island(int id) const;
  bool is_descendant_or_self(int id, int ancestor) const;
};

// Connected components over in-service branches. With a parent topology,
// components identical to a parent island keep its id; any other component
// becomes a new child of the unique parent island containing its buses.
Topology compute_islands(const GridCase& grid, std::span<const char> in_service,
                         const Topology* parent = nullptr);

}  // namespace gridcfc
