// Command-line front end over the C API.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridcfc/gridcfc.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kNumerical = 1, kUsage = 2 };

struct Failure {
  int exit_code;
  std::string message;
};

int exit_for(gcfc_status s) {
  return s == GCFC_ERR_NUMERICAL || s == GCFC_ERR_INTERNAL ? kNumerical : kUsage;
}

void check(gcfc_status s, const std::string& what) {
  if (s != GCFC_OK)
    throw Failure{exit_for(s), what + ": " + gcfc_status_name(s) + ": " + gcfc_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  gcfc_string_free(s);
  return out;
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<gcfc_config, Deleter<gcfc_config, gcfc_config_free>>;
using Case = std::unique_ptr<gcfc_case, Deleter<gcfc_case, gcfc_case_free>>;
using Batch = std::unique_ptr<gcfc_batch, Deleter<gcfc_batch, gcfc_batch_free>>;
using Matrix = std::unique_ptr<gcfc_matrix, Deleter<gcfc_matrix, gcfc_matrix_free>>;
using Ranking = std::unique_ptr<gcfc_ranking, Deleter<gcfc_ranking, gcfc_ranking_free>>;
using Scores = std::unique_ptr<gcfc_scores, Deleter<gcfc_scores, gcfc_scores_free>>;
using Sweep = std::unique_ptr<gcfc_sweep, Deleter<gcfc_sweep, gcfc_sweep_free>>;

// Everything a command needs; manifests store exactly this.
struct Job {
  std::string command;
  json config;
  std::map<std::string, std::string> inputs;
  json args = json::object();
  fs::path out;
};

Config config_from(const json& j) {
  gcfc_config* c = nullptr;
  check(gcfc_config_from_json(j.dump().c_str(), &c), "config");
  return Config(c);
}

Case build_case(const gcfc_config* cfg) {
  gcfc_case* c = nullptr;
  check(gcfc_case_build(cfg, &c), "case");
  return Case(c);
}

std::string hash_of(const gcfc_case* c) {
  char* h = nullptr;
  check(gcfc_case_hash(c, &h), "case hash");
  return take(h);
}

json risk_json(const gcfc_risk& r) {
  return {{"n_samples", r.n_samples},     {"served_mw", r.served_mw},
          {"cfr_mw", r.cfr_mw},           {"std_mw", r.std_mw},
          {"ci95_half_width", r.ci95_half_width}, {"max_loss_mw", r.max_loss_mw},
          {"risk_lt10", r.risk_small},    {"risk_10_30", r.risk_medium},
          {"risk_gt30", r.risk_large},    {"cap_hits", r.cap_hits},
          {"collapses", r.collapses}};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw Failure{kUsage, "cannot write " + p.string()};
}

std::string manifest_name(const Job& job) {
  if (job.command == "structural") return "structural_" + job.args.value("metric", "") + "_manifest.json";
  if (job.command == "validate") return "validate_" + job.args.value("mode", "") + "_manifest.json";
  return job.command + "_manifest.json";
}

void write_manifest(const Job& job, const std::string& case_hash, const json& outputs,
                    double seconds) {
  const json m = {{"command", job.command},
                  {"version", gcfc_version()},
                  {"case_hash", case_hash},
                  {"master_seed", job.config["simulation"]["master_seed"]},
                  {"config", job.config},
                  {"inputs", job.inputs},
                  {"args", job.args},
                  {"outputs", outputs},
                  {"seconds", seconds}};
  write_text(job.out / manifest_name(job), m.dump(2) + "\n");
}

// Case hash recorded by the manifest that produced `file`, if any.
std::optional<std::string> producer_hash(const fs::path& file) {
  const auto dir = file.parent_path().empty() ? fs::path(".") : file.parent_path();
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const auto name = entry.path().filename().string();
    if (name.size() < 14 || name.substr(name.size() - 14) != "_manifest.json") continue;
    std::ifstream in(entry.path());
    const json m = json::parse(in, nullptr, false);
    if (m.is_discarded() || !m.contains("outputs")) continue;
    for (const auto& [key, value] : m["outputs"].items())
      if (value.is_string() && fs::weakly_canonical(value.get<std::string>(), ec) ==
                                   fs::weakly_canonical(file, ec))
        return m.value("case_hash", "");
  }
  return std::nullopt;
}

int run_simulate(const Job& job) {
  auto cfg = config_from(job.config);
  auto c = build_case(cfg.get());
  gcfc_batch* raw = nullptr;
  check(gcfc_simulate(c.get(), cfg.get(), &raw), "simulate");
  Batch b(raw);
  fs::create_directories(job.out);
  const auto batch_path = job.out / "batch.jsonl";
  const auto report_path = job.out / "report.json";
  check(gcfc_batch_write(b.get(), batch_path.string().c_str()), "write batch");
  gcfc_risk risk{};
  check(gcfc_batch_risk(b.get(), &risk), "risk report");
  const auto hash = hash_of(c.get());
  json report = risk_json(risk);
  report["case_hash"] = hash;
  write_text(report_path, report.dump(2) + "\n");
  std::cout << "samples " << risk.n_samples << ", CFR " << risk.cfr_mw << " MW +- "
            << risk.ci95_half_width << " (95%), max " << risk.max_loss_mw << " MW, served "
            << risk.served_mw << " MW\n";
  return kOk;
}

json simulate_outputs(const Job& job) {
  return {{"batch", (job.out / "batch.jsonl").string()},
          {"report", (job.out / "report.json").string()}};
}

int run_rank(const Job& job) {
  auto cfg = config_from(job.config);
  auto c = build_case(cfg.get());
  const auto it = job.inputs.find("batch");
  if (it == job.inputs.end()) throw Failure{kUsage, "rank needs a batch file"};
  gcfc_batch* raw = nullptr;
  check(gcfc_batch_read(it->second.c_str(), &raw), "read batch");
  Batch b(raw);
  gcfc_matrix* mraw = nullptr;
  check(gcfc_interaction_build(b.get(), c.get(), cfg.get(), &mraw), "interaction graph");
  Matrix m(mraw);
  gcfc_ranking* rraw = nullptr;
  const gcfc_status st = gcfc_rank(m.get(), cfg.get(), &rraw);
  const std::string rank_message = st != GCFC_OK ? gcfc_last_error() : "";
  Ranking r(rraw);
  if (st != GCFC_OK && !r) check(st, "ranking");
  fs::create_directories(job.out);
  const double threshold = job.config["interaction"].value("export_threshold", 0.0);
  check(gcfc_ranking_write_csv(r.get(), c.get(), (job.out / "ranking.csv").string().c_str()),
        "write ranking");
  check(gcfc_matrix_write(m.get(), (job.out / "interaction_matrix.csv").string().c_str()),
        "write matrix");
  check(gcfc_matrix_write_edges(m.get(), (job.out / "interaction_edges.csv").string().c_str(),
                                threshold),
        "write edges");
  check(gcfc_matrix_write_gexf(m.get(), c.get(), r.get(),
                               (job.out / "interaction.gexf").string().c_str(), threshold),
        "write gexf");
  int iterations = 0, converged = 0;
  gcfc_ranking_info(r.get(), &iterations, &converged);
  int n_branches = 0;
  gcfc_case_counts(c.get(), nullptr, &n_branches);
  std::vector<int> order(n_branches);
  check(gcfc_ranking_order(r.get(), order.data(), order.size()), "ranking order");
  std::cout << "HITS " << (converged ? "converged" : "stopped") << " after " << iterations
            << " iterations; top branches:";
  for (int k = 0; k < std::min(5, n_branches); ++k) {
    char* label = nullptr;
    gcfc_case_branch_label(c.get(), order[k], &label);
    std::cout << ' ' << take(label);
  }
  std::cout << '\n';
  if (st != GCFC_OK) {
    std::cerr << "warning: " << rank_message << '\n';
    return kNumerical;
  }
  return kOk;
}

json rank_outputs(const Job& job) {
  return {{"ranking", (job.out / "ranking.csv").string()},
          {"matrix", (job.out / "interaction_matrix.csv").string()},
          {"edges", (job.out / "interaction_edges.csv").string()},
          {"gexf", (job.out / "interaction.gexf").string()}};
}

int run_structural(const Job& job) {
  auto cfg = config_from(job.config);
  auto c = build_case(cfg.get());
  const std::string metric = job.args.value("metric", "");
  gcfc_scores* raw = nullptr;
  check(gcfc_structural(c.get(), metric.c_str(), cfg.get(), &raw), "structural metric");
  Scores s(raw);
  fs::create_directories(job.out);
  check(gcfc_scores_write_csv(s.get(), c.get(), (job.out / (metric + ".csv")).string().c_str()),
        "write scores");
  std::cout << "wrote " << (job.out / (metric + ".csv")).string() << '\n';
  return kOk;
}

json structural_outputs(const Job& job) {
  const std::string metric = job.args.value("metric", "");
  return {{"scores", (job.out / (metric + ".csv")).string()}};
}

void print_progress(const char* message, void*) { std::cerr << message << std::endl; }

int run_validate(const Job& job) {
  auto cfg = config_from(job.config);
  auto c = build_case(cfg.get());
  const auto hash = hash_of(c.get());
  std::vector<std::string> names, paths;
  for (const auto& r : job.args.at("rankings")) {
    names.push_back(r.at(0).get<std::string>());
    paths.push_back(r.at(1).get<std::string>());
    if (auto h = producer_hash(paths.back()); h && *h != hash)
      throw Failure{kUsage, "ranking " + paths.back() + " was computed on case " + *h +
                                ", the configured case hashes to " + hash};
  }
  std::vector<const char*> cnames, cpaths;
  for (size_t k = 0; k < names.size(); ++k) {
    cnames.push_back(names[k].c_str());
    cpaths.push_back(paths[k].c_str());
  }
  const std::string mode = job.args.value("mode", "");
  gcfc_set_progress(print_progress, nullptr);
  gcfc_sweep* raw = nullptr;
  check(gcfc_validate(c.get(), cfg.get(), mode.c_str(), cnames.data(), cpaths.data(), names.size(),
                      &raw),
        "validate");
  Sweep s(raw);
  fs::create_directories(job.out);
  check(gcfc_sweep_write(s.get(), (job.out / (mode + "_validation.csv")).string().c_str(),
                         (job.out / (mode + "_validation_long.csv")).string().c_str()),
        "write sweep");
  char* bars = nullptr;
  check(gcfc_sweep_bars(s.get(), &bars), "summary");
  std::cout << take(bars);
  return kOk;
}

json validate_outputs(const Job& job) {
  const std::string mode = job.args.value("mode", "");
  return {{"sweep", (job.out / (mode + "_validation.csv")).string()},
          {"sweep_long", (job.out / (mode + "_validation_long.csv")).string()}};
}

int execute(const Job& job) {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = config_from(job.config);
  auto c = build_case(cfg.get());
  const auto hash = hash_of(c.get());
  int rc = kOk;
  json outputs;
  if (job.command == "simulate") {
    rc = run_simulate(job);
    outputs = simulate_outputs(job);
  } else if (job.command == "rank") {
    rc = run_rank(job);
    outputs = rank_outputs(job);
  } else if (job.command == "structural") {
    rc = run_structural(job);
    outputs = structural_outputs(job);
  } else if (job.command == "validate") {
    rc = run_validate(job);
    outputs = validate_outputs(job);
  } else {
    throw Failure{kUsage, "manifest names unknown command '" + job.command + "'"};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(job, hash, outputs, secs);
  return rc;
}

struct CommonFlags {
  std::string config;
  std::string case_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  std::optional<int> workers;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* opt = cmd->add_option("--config", f.config, "experiment config (JSON)");
  if (config_required) opt->required();
  opt->check(CLI::ExistingFile);
  cmd->add_option("--case", f.case_path, "case file, overrides the config");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--samples", f.samples, "number of cascade samples");
  cmd->add_option("--workers", f.workers, "simulation threads");
  cmd->add_option("--out", f.out, "output directory")->required();
}

json resolve_config(const CommonFlags& f) {
  gcfc_config* raw = nullptr;
  if (!f.config.empty())
    check(gcfc_config_load(f.config.c_str(), 1, &raw), "config");
  else
    check(gcfc_config_default(&raw), "config");
  Config cfg(raw);
  if (!f.case_path.empty())
    check(gcfc_config_set_case_path(cfg.get(), fs::absolute(f.case_path).string().c_str()), "--case");
  if (f.seed) check(gcfc_config_set_seed(cfg.get(), *f.seed), "--seed");
  if (f.samples) check(gcfc_config_set_samples(cfg.get(), *f.samples), "--samples");
  if (f.workers) check(gcfc_config_set_workers(cfg.get(), *f.workers), "--workers");
  char* text = nullptr;
  check(gcfc_config_to_json(cfg.get(), &text), "config");
  return json::parse(take(text));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascading failure analysis: simulate, rank, compare and validate"};
  app.set_version_flag("--version", std::string(gcfc_version()));
  app.require_subcommand(1);

  CommonFlags sim_f, rank_f, struct_f, val_f;
  auto* sim = app.add_subcommand("simulate", "sample cascades and write a batch file");
  add_common(sim, sim_f, true);

  auto* rank = app.add_subcommand("rank", "interaction graph and weighted HITS ranking");
  add_common(rank, rank_f, true);
  std::string batch_path;
  rank->add_option("--batch", batch_path, "batch file from simulate")->required()->check(CLI::ExistingFile);

  auto* structural = app.add_subcommand("structural", "betweenness baselines");
  add_common(structural, struct_f, false);
  std::string metric;
  structural->add_option("--metric", metric, "b1, b2 or b3")->required()->check(CLI::IsMember({"b1", "b2", "b3"}));

  auto* validate = app.add_subcommand("validate", "capacity upgrade validation sweep");
  add_common(validate, val_f, true);
  std::string mode;
  std::vector<std::string> rankings;
  validate->add_option("--mode", mode, "self or cross")->required()->check(CLI::IsMember({"self", "cross"}));
  validate->add_option("--ranking", rankings, "[NAME=]ranking CSV, repeatable")->required();

  auto* rerun = app.add_subcommand("rerun", "repeat a run from its manifest");
  std::string manifest_path, rerun_out;
  std::optional<int> rerun_workers;
  std::vector<std::string> rerun_inputs;
  rerun->add_option("--manifest", manifest_path, "manifest JSON")->required()->check(CLI::ExistingFile);
  rerun->add_option("--out", rerun_out, "output directory (default: the original)");
  rerun->add_option("--workers", rerun_workers, "simulation threads");
  rerun->add_option("--input", rerun_inputs, "NAME=PATH replacing a recorded input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    Job job;
    if (*sim) {
      job = {"simulate", resolve_config(sim_f), {}, json::object(), sim_f.out};
    } else if (*rank) {
      job = {"rank", resolve_config(rank_f), {{"batch", fs::absolute(batch_path).string()}},
             json::object(), rank_f.out};
    } else if (*structural) {
      if (struct_f.config.empty() && struct_f.case_path.empty())
        throw Failure{kUsage, "structural needs --config or --case"};
      job = {"structural", resolve_config(struct_f), {}, {{"metric", metric}}, struct_f.out};
    } else if (*validate) {
      json list = json::array();
      for (const auto& r : rankings) {
        const auto eq = r.find('=');
        const std::string name = eq == std::string::npos ? fs::path(r).stem().string() : r.substr(0, eq);
        const std::string path = eq == std::string::npos ? r : r.substr(eq + 1);
        if (!fs::exists(path)) throw Failure{kUsage, "ranking file " + path + " does not exist"};
        list.push_back({name, fs::absolute(path).string()});
      }
      if (mode == "self" && list.size() != 1)
        throw Failure{kUsage, "self validation takes exactly one --ranking"};
      job = {"validate", resolve_config(val_f), {}, {{"mode", mode}, {"rankings", list}}, val_f.out};
    } else {
      std::ifstream in(manifest_path);
      const json m = json::parse(in, nullptr, false);
      if (m.is_discarded() || !m.contains("command") || !m.contains("config"))
        throw Failure{kUsage, manifest_path + " is not a run manifest"};
      job.command = m["command"].get<std::string>();
      job.config = m["config"];
      if (m.contains("inputs"))
        job.inputs = m["inputs"].get<std::map<std::string, std::string>>();
      job.args = m.value("args", json::object());
      const json outputs = m.value("outputs", json::object());
      job.out = rerun_out.empty() && !outputs.empty()
                    ? fs::path(outputs.begin()->get<std::string>()).parent_path()
                    : fs::path(rerun_out);
      if (job.out.empty()) throw Failure{kUsage, "rerun needs --out"};
      if (rerun_workers) job.config["simulation"]["workers"] = *rerun_workers;
      for (const auto& item : rerun_inputs) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Failure{kUsage, "--input expects NAME=PATH"};
        job.inputs[item.substr(0, eq)] = fs::absolute(item.substr(eq + 1)).string();
      }
    }
    return execute(job);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
