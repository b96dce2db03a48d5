#include "gridcfc/gridcfc.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>

#include "gridcfc/cascade.hpp"
#include "gridcfc/config.hpp"
#include "gridcfc/error.hpp"
#include "gridcfc/interaction.hpp"
#include "gridcfc/ranking.hpp"
#include "gridcfc/structural.hpp"
#include "gridcfc/validation.hpp"

using namespace gridcfc;

struct gcfc_config {
  ExperimentConfig cfg;
};
struct gcfc_case {
  GridCase grid;
  std::string hash;
};
struct gcfc_batch {
  BatchResult batch;
};
struct gcfc_matrix {
  InteractionMatrix m;
};
struct gcfc_ranking {
  RankingResult r;
};
struct gcfc_scores {
  StructuralScores s;
};
struct gcfc_sweep {
  std::vector<SweepRow> rows;
};

namespace {

thread_local std::string last_error;

std::mutex progress_mutex;
gcfc_progress_fn progress_fn = nullptr;
void* progress_user = nullptr;

gcfc_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return GCFC_ERR_INVALID_ARGUMENT;
    case ErrorCode::Io: return GCFC_ERR_IO;
    case ErrorCode::Parse: return GCFC_ERR_PARSE;
    case ErrorCode::InvalidCase: return GCFC_ERR_INVALID_CASE;
    case ErrorCode::Numerical: return GCFC_ERR_NUMERICAL;
    case ErrorCode::Empty: return GCFC_ERR_EMPTY;
    case ErrorCode::Mismatch: return GCFC_ERR_MISMATCH;
  }
  return GCFC_ERR_INTERNAL;
}

template <class F>
gcfc_status guard(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return GCFC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return GCFC_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

gcfc_risk to_risk(const RiskReport& r, std::uint64_t cap_hits = 0, std::uint64_t collapses = 0) {
  return {r.n_samples,       r.served_mw,  r.cfr_mw,      r.std_mw,
          r.ci95_half_width, r.max_loss_mw, r.risk_small, r.risk_medium,
          r.risk_large,      cap_hits,     collapses};
}

void check_case(const BatchResult& b, const gcfc_case* c) {
  if (b.case_hash != c->hash)
    throw Error(ErrorCode::Mismatch, "batch was simulated on case " + b.case_hash +
                                         ", the given case hashes to " + c->hash);
}

}  // namespace

extern "C" {

const char* gcfc_version(void) { return GRIDCFC_VERSION; }

const char* gcfc_last_error(void) { return last_error.c_str(); }

const char* gcfc_status_name(gcfc_status status) {
  switch (status) {
    case GCFC_OK: return "ok";
    case GCFC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case GCFC_ERR_IO: return "i/o error";
    case GCFC_ERR_PARSE: return "parse error";
    case GCFC_ERR_INVALID_CASE: return "invalid case";
    case GCFC_ERR_NUMERICAL: return "numerical failure";
    case GCFC_ERR_EMPTY: return "empty input";
    case GCFC_ERR_MISMATCH: return "mismatched inputs";
    case GCFC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void gcfc_string_free(char* s) { std::free(s); }

void gcfc_set_progress(gcfc_progress_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(progress_mutex);
  progress_fn = fn;
  progress_user = user;
}

gcfc_status gcfc_config_default(gcfc_config** out) {
  return guard([&] {
    require(out, "null output pointer");
    *out = new gcfc_config{};
    return GCFC_OK;
  });
}

gcfc_status gcfc_config_load(const char* path, int use_env, gcfc_config** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new gcfc_config{load_config(path, use_env != 0)};
    return GCFC_OK;
  });
}

gcfc_status gcfc_config_from_json(const char* json, gcfc_config** out) {
  return guard([&] {
    require(json && out, "null argument");
    auto j = nlohmann::json::parse(json, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Parse, "config is not valid JSON");
    *out = new gcfc_config{config_from_json(j)};
    return GCFC_OK;
  });
}

gcfc_status gcfc_config_to_json(const gcfc_config* cfg, char** out) {
  return guard([&] {
    require(cfg && out, "null argument");
    *out = dup(config_to_json(cfg->cfg).dump(2));
    return GCFC_OK;
  });
}

gcfc_status gcfc_config_set_case_path(gcfc_config* cfg, const char* path) {
  return guard([&] {
    require(cfg && path, "null argument");
    cfg->cfg.grid.path = path;
    return GCFC_OK;
  });
}

gcfc_status gcfc_config_set_samples(gcfc_config* cfg, uint64_t n_samples) {
  return guard([&] {
    require(cfg, "null config");
    require(n_samples >= 1, "n_samples must be at least 1");
    cfg->cfg.simulation.n_samples = n_samples;
    return GCFC_OK;
  });
}

gcfc_status gcfc_config_set_seed(gcfc_config* cfg, uint64_t master_seed) {
  return guard([&] {
    require(cfg, "null config");
    cfg->cfg.simulation.master_seed = master_seed;
    return GCFC_OK;
  });
}

gcfc_status gcfc_config_set_workers(gcfc_config* cfg, int workers) {
  return guard([&] {
    require(cfg, "null config");
    require(workers >= 1, "workers must be at least 1");
    cfg->cfg.simulation.workers = workers;
    return GCFC_OK;
  });
}

void gcfc_config_free(gcfc_config* cfg) { delete cfg; }

gcfc_status gcfc_case_build(const gcfc_config* cfg, gcfc_case** out) {
  return guard([&] {
    require(cfg && out, "null argument");
    auto grid = build_case(cfg->cfg.grid);
    auto hash = case_hash(grid);
    *out = new gcfc_case{std::move(grid), std::move(hash)};
    return GCFC_OK;
  });
}

gcfc_status gcfc_case_load(const char* path, gcfc_case** out) {
  return guard([&] {
    require(path && out, "null argument");
    auto grid = load_case(path);
    auto hash = case_hash(grid);
    *out = new gcfc_case{std::move(grid), std::move(hash)};
    return GCFC_OK;
  });
}

gcfc_status gcfc_case_hash(const gcfc_case* c, char** out) {
  return guard([&] {
    require(c && out, "null argument");
    *out = dup(c->hash);
    return GCFC_OK;
  });
}

gcfc_status gcfc_case_counts(const gcfc_case* c, int* n_buses, int* n_branches) {
  return guard([&] {
    require(c, "null case");
    if (n_buses) *n_buses = c->grid.num_buses();
    if (n_branches) *n_branches = c->grid.num_branches();
    return GCFC_OK;
  });
}

gcfc_status gcfc_case_branch_label(const gcfc_case* c, int branch_index, char** out) {
  return guard([&] {
    require(c && out, "null argument");
    require(branch_index >= 0 && branch_index < c->grid.num_branches(), "branch index out of range");
    *out = dup(c->grid.branch_label(branch_index));
    return GCFC_OK;
  });
}

void gcfc_case_free(gcfc_case* c) { delete c; }

gcfc_status gcfc_simulate(const gcfc_case* c, const gcfc_config* cfg, gcfc_batch** out) {
  return guard([&] {
    require(c && cfg && out, "null argument");
    *out = new gcfc_batch{run_batch(c->grid, cfg->cfg.simulation)};
    return GCFC_OK;
  });
}

gcfc_status gcfc_batch_read(const char* path, gcfc_batch** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new gcfc_batch{read_batch(path)};
    return GCFC_OK;
  });
}

gcfc_status gcfc_batch_write(const gcfc_batch* b, const char* path) {
  return guard([&] {
    require(b && path, "null argument");
    write_batch(b->batch, path);
    return GCFC_OK;
  });
}

gcfc_status gcfc_batch_case_hash(const gcfc_batch* b, char** out) {
  return guard([&] {
    require(b && out, "null argument");
    *out = dup(b->batch.case_hash);
    return GCFC_OK;
  });
}

gcfc_status gcfc_batch_risk(const gcfc_batch* b, gcfc_risk* out) {
  return guard([&] {
    require(b && out, "null argument");
    const auto r = risk_report(b->batch.records, b->batch.served_mw);
    *out = to_risk(r, b->batch.summary.cap_hits, b->batch.summary.collapses);
    return GCFC_OK;
  });
}

gcfc_status gcfc_batch_size(const gcfc_batch* b, uint64_t* n_samples) {
  return guard([&] {
    require(b && n_samples, "null argument");
    *n_samples = b->batch.records.size();
    return GCFC_OK;
  });
}

gcfc_status gcfc_batch_record_json(const gcfc_batch* b, uint64_t index, char** out) {
  return guard([&] {
    require(b && out, "null argument");
    require(index < b->batch.records.size(), "record index out of range");
    *out = dup(record_to_json(b->batch.records[index]).dump());
    return GCFC_OK;
  });
}

void gcfc_batch_free(gcfc_batch* b) { delete b; }

gcfc_status gcfc_interaction_build(const gcfc_batch* b, const gcfc_case* c,
                                   const gcfc_config* cfg, gcfc_matrix** out) {
  return guard([&] {
    require(b && c && cfg && out, "null argument");
    check_case(b->batch, c);
    *out = new gcfc_matrix{accumulate(b->batch, c->grid.num_branches(), cfg->cfg.interaction)};
    return GCFC_OK;
  });
}

gcfc_status gcfc_matrix_read(const char* path, gcfc_matrix** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new gcfc_matrix{read_matrix(path)};
    return GCFC_OK;
  });
}

gcfc_status gcfc_matrix_write(const gcfc_matrix* m, const char* path) {
  return guard([&] {
    require(m && path, "null argument");
    write_matrix(m->m, path);
    return GCFC_OK;
  });
}

gcfc_status gcfc_matrix_get(const gcfc_matrix* m, int from, int to, double* out) {
  return guard([&] {
    require(m && out, "null argument");
    require(from >= 0 && from < m->m.n_branches && to >= 0 && to < m->m.n_branches,
            "branch index out of range");
    *out = m->m.at(from, to);
    return GCFC_OK;
  });
}

gcfc_status gcfc_matrix_size(const gcfc_matrix* m, int* n_branches) {
  return guard([&] {
    require(m && n_branches, "null argument");
    *n_branches = m->m.n_branches;
    return GCFC_OK;
  });
}

gcfc_status gcfc_matrix_write_edges(const gcfc_matrix* m, const char* path, double threshold) {
  return guard([&] {
    require(m && path, "null argument");
    write_edge_csv(m->m, path, threshold);
    return GCFC_OK;
  });
}

gcfc_status gcfc_matrix_write_gexf(const gcfc_matrix* m, const gcfc_case* c,
                                   const gcfc_ranking* ranking, const char* path,
                                   double threshold) {
  return guard([&] {
    require(m && c && path, "null argument");
    write_gexf(m->m, c->grid, path, threshold, ranking ? &ranking->r.k : nullptr);
    return GCFC_OK;
  });
}

void gcfc_matrix_free(gcfc_matrix* m) { delete m; }

gcfc_status gcfc_rank(const gcfc_matrix* m, const gcfc_config* cfg, gcfc_ranking** out) {
  return guard([&] {
    require(m && cfg && out, "null argument");
    auto r = weighted_hits(regularize(to_weights(m->m), cfg->cfg.regularize_floor), cfg->cfg.hits);
    const bool converged = r.converged;
    *out = new gcfc_ranking{std::move(r)};
    if (!converged) {
      last_error = "weighted HITS did not converge within " +
                   std::to_string(cfg->cfg.hits.max_iter) + " iterations";
      return GCFC_ERR_NUMERICAL;
    }
    return GCFC_OK;
  });
}

gcfc_status gcfc_ranking_info(const gcfc_ranking* r, int* iterations, int* converged) {
  return guard([&] {
    require(r, "null ranking");
    if (iterations) *iterations = r->r.iterations;
    if (converged) *converged = r->r.converged ? 1 : 0;
    return GCFC_OK;
  });
}

gcfc_status gcfc_ranking_order(const gcfc_ranking* r, int* order, size_t capacity) {
  return guard([&] {
    require(r && order, "null argument");
    require(capacity >= r->r.order.size(), "order buffer too small");
    std::copy(r->r.order.begin(), r->r.order.end(), order);
    return GCFC_OK;
  });
}

gcfc_status gcfc_ranking_scores(const gcfc_ranking* r, int branch_index, double* auth,
                                double* hub, double* k) {
  return guard([&] {
    require(r, "null ranking");
    require(branch_index >= 0 && branch_index < static_cast<int>(r->r.k.size()),
            "branch index out of range");
    if (auth) *auth = r->r.auth[branch_index];
    if (hub) *hub = r->r.hub[branch_index];
    if (k) *k = r->r.k[branch_index];
    return GCFC_OK;
  });
}

gcfc_status gcfc_ranking_write_csv(const gcfc_ranking* r, const gcfc_case* c, const char* path) {
  return guard([&] {
    require(r && c && path, "null argument");
    write_ranking_csv(r->r, c->grid, path);
    return GCFC_OK;
  });
}

void gcfc_ranking_free(gcfc_ranking* r) { delete r; }

gcfc_status gcfc_structural(const gcfc_case* c, const char* metric, const gcfc_config* cfg,
                            gcfc_scores** out) {
  return guard([&] {
    require(c && metric && out, "null argument");
    const StructuralOptions opts = cfg ? cfg->cfg.structural : StructuralOptions{};
    *out = new gcfc_scores{structural_scores(c->grid, parse_structural_metric(metric), opts)};
    return GCFC_OK;
  });
}

gcfc_status gcfc_scores_get(const gcfc_scores* s, int branch_index, double* out) {
  return guard([&] {
    require(s && out, "null argument");
    require(branch_index >= 0 && branch_index < static_cast<int>(s->s.score.size()),
            "branch index out of range");
    *out = s->s.score[branch_index];
    return GCFC_OK;
  });
}

gcfc_status gcfc_scores_write_csv(const gcfc_scores* s, const gcfc_case* c, const char* path) {
  return guard([&] {
    require(s && c && path, "null argument");
    write_scores_csv(s->s, c->grid, path);
    return GCFC_OK;
  });
}

void gcfc_scores_free(gcfc_scores* s) { delete s; }

gcfc_status gcfc_validate(const gcfc_case* c, const gcfc_config* cfg, const char* mode,
                          const char* const* names, const char* const* ranking_paths,
                          size_t n_rankings, gcfc_sweep** out) {
  return guard([&] {
    require(c && cfg && mode && ranking_paths && out, "null argument");
    require(n_rankings >= 1, "at least one ranking file is needed");
    const std::string m(mode);
    require(m == "self" || m == "cross", "mode must be 'self' or 'cross'");
    require(m == "cross" || n_rankings == 1, "self validation takes exactly one ranking file");
    std::vector<std::pair<std::string, std::vector<int>>> orders;
    for (size_t k = 0; k < n_rankings; ++k) {
      require(ranking_paths[k], "null ranking path");
      const std::string name = names && names[k] ? names[k] : "ranking" + std::to_string(k + 1);
      orders.push_back({name, read_order_csv(ranking_paths[k], c->grid.num_branches())});
    }
    const auto& v = cfg->cfg.validation;
    UpgradeExperiment exp(c->grid, cfg->cfg.simulation, v.delta_c_mw);
    exp.on_plan = [&](const std::vector<int>& branches) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      if (!progress_fn) return;
      std::string msg = "simulating upgrade of " + std::to_string(branches.size()) + " branches";
      progress_fn(msg.c_str(), progress_user);
    };
    auto sweep = std::make_unique<gcfc_sweep>();
    sweep->rows = m == "self" ? self_validate(exp, orders[0].second, v.sizes, v.middle_start)
                              : cross_validate(exp, orders, v.sizes);
    *out = sweep.release();
    return GCFC_OK;
  });
}

gcfc_status gcfc_sweep_size(const gcfc_sweep* s, size_t* rows) {
  return guard([&] {
    require(s && rows, "null argument");
    *rows = s->rows.size();
    return GCFC_OK;
  });
}

gcfc_status gcfc_sweep_row(const gcfc_sweep* s, size_t row, char** group, int* size,
                           gcfc_risk* risk) {
  return guard([&] {
    require(s, "null sweep");
    require(row < s->rows.size(), "row out of range");
    const auto& r = s->rows[row];
    if (group) *group = dup(r.group);
    if (size) *size = r.size;
    if (risk) *risk = to_risk(r.report);
    return GCFC_OK;
  });
}

gcfc_status gcfc_sweep_write(const gcfc_sweep* s, const char* csv_path, const char* long_csv_path) {
  return guard([&] {
    require(s, "null sweep");
    if (csv_path) write_sweep_csv(s->rows, csv_path);
    if (long_csv_path) write_sweep_long_csv(s->rows, long_csv_path);
    return GCFC_OK;
  });
}

gcfc_status gcfc_sweep_bars(const gcfc_sweep* s, char** out) {
  return guard([&] {
    require(s && out, "null argument");
    *out = dup(sweep_bars(s->rows));
    return GCFC_OK;
  });
}

void gcfc_sweep_free(gcfc_sweep* s) { delete s; }

}  // extern "C"
