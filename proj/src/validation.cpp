#include "gridcfc/validation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridcfc/error.hpp"

namespace gridcfc {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string branch_list(const std::vector<int>& branches) {
  std::string s;
  for (int l : branches) s += (s.empty() ? "" : " ") + std::to_string(l + 1);
  return s;
}

}  // namespace

GridCase apply_upgrade(const GridCase& grid, const UpgradePlan& plan) {
  if (!(plan.delta_c_mw >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "capacity upgrade must be nonnegative");
  GridCase out = grid;
  std::vector<char> seen(grid.num_branches(), 0);
  for (int l : plan.branches) {
    if (l < 0 || l >= grid.num_branches())
      throw Error(ErrorCode::InvalidArgument,
                  "upgrade names unknown branch index " + std::to_string(l));
    if (seen[l])
      throw Error(ErrorCode::InvalidArgument,
                  "upgrade lists branch " + grid.branch_label(l) + " twice");
    seen[l] = 1;
    out.branches[l].f_lim1 += plan.delta_c_mw;
    out.branches[l].f_lim2 += plan.delta_c_mw;
  }
  return out;
}

RiskReport risk_report(const std::vector<CascadeRecord>& records, double served_mw) {
  if (records.empty()) throw Error(ErrorCode::Empty, "no samples");
  if (!(served_mw > 0.0)) throw Error(ErrorCode::InvalidArgument, "served load must be positive");
  const auto sum = summarize(records);
  RiskReport r;
  r.n_samples = sum.n_samples;
  r.served_mw = served_mw;
  r.cfr_mw = sum.cfr_mw;
  r.std_mw = sum.std_mw;
  r.ci95_half_width = sum.ci95_half_width;
  r.max_loss_mw = sum.max_loss_mw;
  for (const auto& rec : records) {
    const double share = rec.total_loss / served_mw;
    if (share < 0.1)
      r.risk_small += rec.total_loss;
    else if (share <= 0.3)
      r.risk_medium += rec.total_loss;
    else
      r.risk_large += rec.total_loss;
  }
  const double n = static_cast<double>(records.size());
  r.risk_small /= n;
  r.risk_medium /= n;
  r.risk_large /= n;
  return r;
}

UpgradeExperiment::UpgradeExperiment(GridCase grid, SimulationConfig config, double delta_c_mw)
    : grid_(std::move(grid)), config_(std::move(config)), delta_c_(delta_c_mw) {
  validate(config_, grid_);
  if (!(delta_c_mw >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "capacity upgrade must be nonnegative");
}

const BatchResult& UpgradeExperiment::batch(std::vector<int> branches) {
  std::sort(branches.begin(), branches.end());
  if (auto it = batches_.find(branches); it != batches_.end()) return it->second;
  if (on_plan) on_plan(branches);
  // Ratings do not enter the power flow, so the secured base state of the
  // original grid stays valid on every upgraded grid.
  if (!base_) base_ = prepare_operating_point(grid_, config_);
  OperatingPoint op = *base_;
  op.grid = apply_upgrade(grid_, {branches, delta_c_});
  op.case_hash = case_hash(op.grid);
  auto result = run_batch(op, config_);
  if (!batch_dir.empty()) {
    std::filesystem::create_directories(batch_dir);
    std::string name = "plan";
    for (int l : branches) name += "_" + std::to_string(l + 1);
    write_batch(result, batch_dir / (name + ".jsonl"));
  }
  return batches_.emplace(branches, std::move(result)).first->second;
}

const RiskReport& UpgradeExperiment::evaluate(std::vector<int> branches) {
  std::sort(branches.begin(), branches.end());
  if (auto it = reports_.find(branches); it != reports_.end()) return it->second;
  const auto& b = batch(branches);
  return reports_.emplace(branches, risk_report(b.records, b.served_mw)).first->second;
}

std::vector<SweepRow> self_validate(UpgradeExperiment& exp, const std::vector<int>& order,
                                    const std::vector<int>& sizes, int middle_start) {
  if (!std::is_sorted(sizes.begin(), sizes.end()))
    throw Error(ErrorCode::InvalidArgument, "sweep sizes must be ascending");
  if (static_cast<int>(order.size()) != exp.grid().num_branches())
    throw Error(ErrorCode::Mismatch, "ranking covers " + std::to_string(order.size()) +
                                         " branches, the case has " +
                                         std::to_string(exp.grid().num_branches()));
  std::vector<SweepRow> rows;
  for (RankGroup g : {RankGroup::Top, RankGroup::Middle, RankGroup::Bottom})
    for (int size : sizes) {
      SweepRow row;
      row.group = to_string(g);
      row.size = size;
      row.branches = select_group(order, g, size, middle_start);
      row.report = exp.evaluate(row.branches);
      rows.push_back(std::move(row));
    }
  return rows;
}

std::vector<SweepRow> cross_validate(
    UpgradeExperiment& exp, const std::vector<std::pair<std::string, std::vector<int>>>& orders,
    const std::vector<int>& sizes) {
  if (!std::is_sorted(sizes.begin(), sizes.end()))
    throw Error(ErrorCode::InvalidArgument, "sweep sizes must be ascending");
  std::vector<SweepRow> rows;
  for (const auto& [name, order] : orders) {
    if (static_cast<int>(order.size()) != exp.grid().num_branches())
      throw Error(ErrorCode::Mismatch, "ranking '" + name + "' does not cover every branch");
    for (int size : sizes) {
      SweepRow row;
      row.group = name;
      row.size = size;
      row.branches = select_group(order, RankGroup::Top, size);
      row.report = exp.evaluate(row.branches);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

const SweepRow& find_row(const std::vector<SweepRow>& rows, const std::string& group, int size) {
  for (const auto& r : rows)
    if (r.group == group && r.size == size) return r;
  throw Error(ErrorCode::InvalidArgument,
              "no sweep row for group '" + group + "' size " + std::to_string(size));
}

bool separated_below(const RiskReport& a, const RiskReport& b) {
  return a.cfr_mw + a.ci95_half_width < b.cfr_mw - b.ci95_half_width;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << "group,size,n_samples,served_mw,cfr,ci95,std,max_loss,risk_lt10,risk_10_30,risk_gt30,"
         "branches\n";
  for (const auto& r : rows) {
    const auto& p = r.report;
    out << r.group << ',' << r.size << ',' << p.n_samples << ',' << fmt(p.served_mw) << ','
        << fmt(p.cfr_mw) << ',' << fmt(p.ci95_half_width) << ',' << fmt(p.std_mw) << ','
        << fmt(p.max_loss_mw) << ',' << fmt(p.risk_small) << ',' << fmt(p.risk_medium) << ','
        << fmt(p.risk_large) << ',' << branch_list(r.branches) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

void write_sweep_long_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << "group,size,measure,value\n";
  for (const auto& r : rows) {
    const auto& p = r.report;
    for (auto [name, v] : {std::pair{"cfr", p.cfr_mw},
                           {"ci95", p.ci95_half_width},
                           {"risk_lt10", p.risk_small},
                           {"risk_10_30", p.risk_medium},
                           {"risk_gt30", p.risk_large}})
      out << r.group << ',' << r.size << ',' << name << ',' << fmt(v) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

std::string sweep_bars(const std::vector<SweepRow>& rows, int width) {
  double top = 0.0;
  size_t label = 0;
  for (const auto& r : rows) {
    top = std::max(top, r.report.cfr_mw);
    label = std::max(label, r.group.size());
  }
  std::ostringstream s;
  for (const auto& r : rows) {
    const int n = top > 0.0 ? static_cast<int>(std::lround(width * r.report.cfr_mw / top)) : 0;
    s << r.group << std::string(label - r.group.size(), ' ') << ' ' << (r.size < 10 ? " " : "")
      << r.size << " |" << std::string(n, '#') << std::string(width - n, ' ') << "| ";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f +- %.2f MW", r.report.cfr_mw, r.report.ci95_half_width);
    s << buf << '\n';
  }
  return s.str();
}

}  // namespace gridcfc
