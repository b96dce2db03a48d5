#include "gridcfc/cascade.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

#include "gridcfc/error.hpp"

namespace gridcfc {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Draw kinds keep the streams of different decisions apart.
enum Draw : std::uint64_t { kInitialPair = 1, kInitialBranch, kOverload, kHidden };

}  // namespace

const char* to_string(OutageCause cause) {
  switch (cause) {
    case OutageCause::Initial: return "initial";
    case OutageCause::Overload: return "overload";
    case OutageCause::Hidden: return "hidden";
    case OutageCause::Emergency: return "emergency";
  }
  return "?";
}

OutageCause parse_outage_cause(const std::string& tag) {
  for (auto c : {OutageCause::Initial, OutageCause::Overload, OutageCause::Hidden,
                 OutageCause::Emergency})
    if (tag == to_string(c)) return c;
  throw Error(ErrorCode::Parse, "unknown outage cause '" + tag + "'");
}

const char* to_string(InitialOutagePolicy policy) {
  return policy == InitialOutagePolicy::UniformN2 ? "uniform_n2" : "independent";
}

InitialOutagePolicy parse_initial_policy(const std::string& tag) {
  if (tag == "uniform_n2") return InitialOutagePolicy::UniformN2;
  if (tag == "independent") return InitialOutagePolicy::Independent;
  throw Error(ErrorCode::InvalidArgument, "unknown initial outage policy '" + tag + "'");
}

const char* to_string(DispatchPolicy policy) {
  return policy == DispatchPolicy::EveryQuietStage ? "every_quiet_stage" : "once_per_island";
}

DispatchPolicy parse_dispatch_policy(const std::string& tag) {
  if (tag == "every_quiet_stage") return DispatchPolicy::EveryQuietStage;
  if (tag == "once_per_island") return DispatchPolicy::OncePerIsland;
  throw Error(ErrorCode::InvalidArgument, "unknown dispatch policy '" + tag + "'");
}

bool CascadeRecord::is_descendant_or_self(int island, int ancestor) const {
  for (int id = island; id >= 0; id = id < static_cast<int>(lineage.size()) ? lineage[id] : -1)
    if (id == ancestor) return true;
  return false;
}

void validate(const SimulationConfig& config, const GridCase& grid) {
  std::string msg;
  if (config.n_samples < 1) msg += "\n  n_samples must be at least 1";
  if (config.max_stages < 1) msg += "\n  max_stages must be at least 1";
  if (config.workers < 1) msg += "\n  workers must be at least 1";
  if (config.initial_policy == InitialOutagePolicy::UniformN2 && grid.num_branches() < 2)
    msg += "\n  uniform N-2 sampling needs at least two branches";
  if (config.initial_policy == InitialOutagePolicy::Independent) {
    if (static_cast<int>(config.initial_probability.size()) != grid.num_branches()) {
      msg += "\n  initial_probability needs one entry per branch";
    } else {
      bool any = false;
      for (double p : config.initial_probability) {
        if (!(p >= 0.0 && p <= 1.0)) msg += "\n  initial probabilities must lie in [0, 1]";
        any |= p > 0.0;
      }
      if (!any) msg += "\n  at least one initial probability must be positive";
    }
  }
  if (!msg.empty()) throw Error(ErrorCode::InvalidArgument, "invalid simulation config:" + msg);
}

double branch_failure_prob(double flow_mw, double f_lim1, double f_lim2) {
  if (!(f_lim1 > 0.0) || f_lim2 < f_lim1)
    throw Error(ErrorCode::InvalidArgument, "failure probability needs 0 < f_lim1 <= f_lim2");
  if (flow_mw <= f_lim1) return 0.0;
  if (flow_mw > f_lim2) return 1.0;
  return (flow_mw - f_lim1) / (f_lim2 - f_lim1);
}

std::uint64_t DrawStream::bits(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
  return mix(mix(mix(seed_ ^ mix(a)) ^ b) ^ c);
}

double DrawStream::uniform(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
  return static_cast<double>(bits(a, b, c) >> 11) * 0x1.0p-53;
}

std::uint64_t sample_seed(std::uint64_t master_seed, std::uint64_t sample_index) {
  return mix(mix(master_seed) ^ sample_index);
}

std::vector<int> sample_initial_outages(const GridCase& grid, const SimulationConfig& config,
                                        const DrawStream& rng) {
  const int n = grid.num_branches();
  if (config.initial_policy == InitialOutagePolicy::UniformN2) {
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "N-2 sampling needs two branches");
    // Index into the C(n, 2) pairs, decoded row by row.
    const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    std::uint64_t k = static_cast<std::uint64_t>(rng.uniform(kInitialPair) * pairs);
    k = std::min(k, pairs - 1);
    for (int i = 0; i < n - 1; ++i) {
      const std::uint64_t row = n - 1 - i;
      if (k < row) return {i, i + 1 + static_cast<int>(k)};
      k -= row;
    }
    return {n - 2, n - 1};
  }
  for (std::uint64_t attempt = 0;; ++attempt) {
    std::vector<int> out;
    for (int l = 0; l < n; ++l)
      if (rng.uniform(kInitialBranch, attempt, l) < config.initial_probability[l]) out.push_back(l);
    if (!out.empty()) return out;
  }
}

std::vector<OutageEvent> sample_sequent_outages(const GridCase& grid, const Topology& topo,
                                                int island, const SystemState& state,
                                                const std::vector<int>& exposed, int stage,
                                                const DrawStream& rng) {
  std::vector<OutageEvent> out;
  std::vector<char> tripped(grid.num_branches(), 0);
  for (int l = 0; l < grid.num_branches(); ++l) {
    const auto& br = grid.branches[l];
    if (!topo.in_service[l] || topo.island_of_bus[br.from] != island) continue;
    const double p = branch_failure_prob(state.branch_flow[l], br.f_lim1, br.f_lim2);
    if (p > 0.0 && rng.uniform(kOverload, stage, l) < p) {
      out.push_back({l, stage, island, p >= 1.0 ? OutageCause::Emergency : OutageCause::Overload});
      tripped[l] = 1;
    }
  }
  for (int l : exposed) {
    const auto& br = grid.branches[l];
    if (tripped[l] || !topo.in_service[l] || topo.island_of_bus[br.from] != island) continue;
    if (rng.uniform(kHidden, stage, l) < br.hidden_failure_prob) {
      out.push_back({l, stage, island, OutageCause::Hidden});
      tripped[l] = 1;
    }
  }
  std::sort(out.begin(), out.end(),
            [](const OutageEvent& a, const OutageEvent& b) { return a.branch < b.branch; });
  return out;
}

OperatingPoint prepare_operating_point(const GridCase& grid, const SimulationConfig& config) {
  validate_case(grid);
  validate(config, grid);
  OperatingPoint op;
  op.grid = grid;
  op.case_hash = case_hash(grid);
  op.topo = compute_islands(grid, std::vector<char>(grid.num_branches(), 1));
  op.state = initial_state(grid);
  for (const auto& isl : op.topo.islands) {
    op.state = settle_island(grid, op.topo, isl.id, op.state, config.power_flow);
    if (!op.state.converged() || op.state.collapsed)
      throw Error(ErrorCode::Numerical, "base case island " + std::to_string(isl.id) +
                                            " has no power-flow solution");
    if (config.secure_base) {
      auto sol = emergent_dispatch(grid, op.topo, isl.id, op.state, config.dispatch);
      if (!sol.feasible)
        throw Error(ErrorCode::Numerical, "base case island " + std::to_string(isl.id) +
                                              " has no secure dispatch");
      op.state = std::move(sol.state);
    }
    op.served_mw += island_served_mw(grid, op.topo, isl.id, op.state);
  }
  if (!(op.served_mw > 0.0)) throw Error(ErrorCode::Numerical, "base case serves no load");
  op.branches_at_bus.resize(grid.num_buses());
  for (int l = 0; l < grid.num_branches(); ++l) {
    op.branches_at_bus[grid.branches[l].from].push_back(l);
    op.branches_at_bus[grid.branches[l].to].push_back(l);
  }
  return op;
}

CascadeRecord run_cascade(const OperatingPoint& op, const SimulationConfig& config,
                          std::uint64_t sample_index) {
  const GridCase& grid = op.grid;
  CascadeRecord rec;
  rec.index = sample_index;
  rec.seed = sample_seed(config.master_seed, sample_index);
  const DrawStream rng(rec.seed);

  Topology topo = op.topo;
  SystemState state = op.state;
  std::vector<int> failed_stage(grid.num_branches(), -1);
  std::vector<char> dispatched;

  std::vector<char> mask = topo.in_service;
  std::vector<int> active;  // islands whose outages continue the cascade
  for (int l : sample_initial_outages(grid, config, rng)) {
    const int isl = topo.island_of_bus[grid.branches[l].from];
    rec.events.push_back({l, 0, isl, OutageCause::Initial});
    failed_stage[l] = 0;
    mask[l] = 0;
    if (std::find(active.begin(), active.end(), isl) == active.end()) active.push_back(isl);
  }

  // Islands descending from the given ids after a topology update.
  auto successors = [&](const std::vector<int>& ids) {
    std::vector<int> next;
    for (const auto& isl : topo.islands)
      for (int id : ids)
        if (topo.is_descendant_or_self(isl.id, id)) {
          next.push_back(isl.id);
          break;
        }
    return next;
  };
  topo = compute_islands(grid, mask, &topo);
  std::vector<int> current = successors(active);

  int stage = 1;
  for (; !current.empty() && stage <= config.max_stages; ++stage) {
    active.clear();
    for (int isl : current) {
      const double before = island_served_mw(grid, topo, isl, state);
      state = settle_island(grid, topo, isl, state, config.power_flow);
      rec.collapses += state.collapsed;

      std::vector<int> exposed;
      auto expose_from = [&](int l) {
        for (int b : {grid.branches[l].from, grid.branches[l].to})
          for (int k : op.branches_at_bus[b])
            if (k != l) exposed.push_back(k);
      };
      for (int l = 0; l < grid.num_branches(); ++l)
        if (failed_stage[l] == stage - 1) expose_from(l);

      auto events = std::vector<OutageEvent>{};
      if (state.converged()) {
        // Overload trips of this stage expose their neighbours too.
        auto first = sample_sequent_outages(grid, topo, isl, state, {}, stage, rng);
        for (const auto& e : first) expose_from(e.branch);
        std::sort(exposed.begin(), exposed.end());
        exposed.erase(std::unique(exposed.begin(), exposed.end()), exposed.end());
        events = sample_sequent_outages(grid, topo, isl, state, exposed, stage, rng);
      }

      if (events.empty()) {
        const bool may_dispatch =
            config.dispatch_policy == DispatchPolicy::EveryQuietStage ||
            std::find(dispatched.begin(), dispatched.end(), isl) == dispatched.end();
        bool silenced = true;
        if (may_dispatch && state.converged()) {
          dispatched.push_back(isl);
          auto sol = emergent_dispatch(grid, topo, isl, state, config.dispatch);
          state = std::move(sol.state);
          silenced = !state.converged() ||
                     !find_violations(grid, topo, isl, state, config.dispatch.flow_tol_mw,
                                      config.dispatch.voltage_tol)
                          .any();
        }
        if (!silenced) active.push_back(isl);
      } else {
        for (const auto& e : events) {
          rec.events.push_back(e);
          failed_stage[e.branch] = stage;
          mask[e.branch] = 0;
        }
        active.push_back(isl);
      }
      rec.losses.push_back({isl, stage, before - island_served_mw(grid, topo, isl, state)});
    }
    rec.stages = stage;
    topo = compute_islands(grid, mask, &topo);
    current = successors(active);
  }
  rec.cap_hit = !current.empty();
  rec.lineage = topo.parent;
  for (const auto& l : rec.losses) rec.total_loss += l.mw;
  return rec;
}

RiskSummary summarize(const std::vector<CascadeRecord>& records) {
  RiskSummary sum;
  sum.n_samples = records.size();
  if (records.empty()) return sum;
  double total = 0.0;
  for (const auto& r : records) {
    total += r.total_loss;
    sum.max_loss_mw = std::max(sum.max_loss_mw, r.total_loss);
    sum.cap_hits += r.cap_hit;
    sum.collapses += r.collapses;
  }
  const double n = static_cast<double>(records.size());
  sum.cfr_mw = total / n;
  if (records.size() > 1) {
    double sq = 0.0;
    for (const auto& r : records) sq += (r.total_loss - sum.cfr_mw) * (r.total_loss - sum.cfr_mw);
    sum.std_mw = std::sqrt(sq / (n - 1.0));
    sum.ci95_half_width = 1.959963984540054 * sum.std_mw / std::sqrt(n);
  }
  return sum;
}

BatchResult run_batch(const OperatingPoint& op, const SimulationConfig& config,
                      std::uint64_t first) {
  validate(config, op.grid);
  BatchResult batch;
  batch.case_hash = op.case_hash;
  batch.case_name = op.grid.name;
  batch.served_mw = op.served_mw;
  batch.master_seed = config.master_seed;
  batch.records.resize(config.n_samples);

  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::uint64_t k; !failed && (k = next++) < config.n_samples;) {
      try {
        batch.records[k] = run_cascade(op, config, first + k);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const int workers =
      static_cast<int>(std::min<std::uint64_t>(config.workers, config.n_samples));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  batch.summary = summarize(batch.records);
  return batch;
}

BatchResult run_batch(const GridCase& grid, const SimulationConfig& config) {
  return run_batch(prepare_operating_point(grid, config), config);
}

nlohmann::json record_to_json(const CascadeRecord& record) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : record.events)
    events.push_back({e.branch, e.stage, e.island, to_string(e.cause)});
  nlohmann::json losses = nlohmann::json::array();
  for (const auto& l : record.losses) losses.push_back({l.island, l.stage, l.mw});
  return {{"index", record.index},       {"seed", record.seed},
          {"total_loss", record.total_loss}, {"stages", record.stages},
          {"cap_hit", record.cap_hit},   {"collapses", record.collapses},
          {"events", events},            {"losses", losses},
          {"lineage", record.lineage}};
}

CascadeRecord record_from_json(const nlohmann::json& j) {
  try {
    CascadeRecord r;
    r.index = j.at("index").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.total_loss = j.at("total_loss").get<double>();
    r.stages = j.at("stages").get<int>();
    r.cap_hit = j.at("cap_hit").get<bool>();
    r.collapses = j.value("collapses", 0);
    for (const auto& e : j.at("events"))
      r.events.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>(),
                          parse_outage_cause(e.at(3).get<std::string>())});
    for (const auto& l : j.at("losses"))
      r.losses.push_back({l.at(0).get<int>(), l.at(1).get<int>(), l.at(2).get<double>()});
    r.lineage = j.at("lineage").get<std::vector<int>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("cascade record: ") + e.what());
  }
}

void write_batch(const BatchResult& batch, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  const nlohmann::json header = {{"kind", "cascade_batch"},
                                 {"case_hash", batch.case_hash},
                                 {"case_name", batch.case_name},
                                 {"served_mw", batch.served_mw},
                                 {"master_seed", batch.master_seed},
                                 {"n_samples", batch.records.size()}};
  out << header.dump() << '\n';
  for (const auto& r : batch.records) out << record_to_json(r).dump() << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

BatchResult read_batch(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open batch file '" + path.string() + "'");
  BatchResult batch;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_header) {
      if (j.value("kind", "") != "cascade_batch")
        throw Error(ErrorCode::Parse, path.string() + ":1: missing cascade_batch header");
      batch.case_hash = j.at("case_hash").get<std::string>();
      batch.case_name = j.value("case_name", "");
      batch.served_mw = j.at("served_mw").get<double>();
      batch.master_seed = j.at("master_seed").get<std::uint64_t>();
      have_header = true;
      continue;
    }
    try {
      batch.records.push_back(record_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::Parse, "'" + path.string() + "' is empty");
  batch.summary = summarize(batch.records);
  return batch;
}

}  // namespace gridcfc
