#pragma once

// Small hand-built cascade batches on five branches with interaction
// matrices summed by hand (k1 = 6, k2 = 3, served load 100 MW).

#include <cmath>
#include <string>
#include <vector>

#include "gridcfc/cascade.hpp"

namespace gridcfc::toy {

inline constexpr int kBranches = 5;
inline constexpr double kServed = 100.0;

// One severity term: 6 e^{3 loss / 100} / (n_cause n_effect).
inline double term(double loss, int n_cause, int n_effect) {
  return 6.0 * std::exp(3.0 * loss / 100.0) / (n_cause * n_effect);
}

struct ToyBatch {
  std::string name;
  BatchResult batch;
  std::vector<double> expected;  // row-major 5 x 5

  double& at(int i, int j) { return expected[i * kBranches + j]; }
};

inline OutageEvent ev(int branch, int stage, int island,
                      OutageCause cause = OutageCause::Overload) {
  return {branch, stage, island, stage == 0 ? OutageCause::Initial : cause};
}

inline CascadeRecord record(std::uint64_t index, std::vector<OutageEvent> events,
                            std::vector<StageLoss> losses, std::vector<int> lineage) {
  CascadeRecord r;
  r.index = index;
  r.events = std::move(events);
  r.losses = std::move(losses);
  r.lineage = std::move(lineage);
  for (const auto& l : r.losses) r.total_loss += l.mw;
  for (const auto& e : r.events) r.stages = std::max(r.stages, e.stage + 1);
  return r;
}

inline ToyBatch make_batch(std::string name, std::vector<CascadeRecord> records) {
  ToyBatch t;
  t.name = std::move(name);
  t.batch.case_hash = "toy";
  t.batch.served_mw = kServed;
  t.batch.records = std::move(records);
  t.batch.summary = summarize(t.batch.records);
  t.expected.assign(kBranches * kBranches, 0.0);
  return t;
}

// The initial pair splits the grid; the two halves then fail in adjacent
// stages without any causal link between them.
inline ToyBatch split_islands() {
  auto t = make_batch(
      "split islands",
      {record(0,
              {ev(0, 0, 0), ev(1, 0, 0), ev(2, 1, 1), ev(3, 1, 2), ev(4, 2, 1)},
              {{1, 1, 10.0}, {2, 1, 0.0}, {1, 2, 20.0}, {2, 2, 5.0}, {1, 3, 0.0}},
              {-1, 0, 0})});
  t.at(0, 2) = term(10.0 + 20.0, 2, 1) / 1.0;
  t.at(1, 2) = term(10.0 + 20.0, 2, 1) / 1.0;
  t.at(0, 3) = term(0.0 + 5.0, 2, 1) / 1.0;
  t.at(1, 3) = term(0.0 + 5.0, 2, 1) / 1.0;
  t.at(2, 4) = term(20.0 + 0.0, 1, 1) / 1.0;
  // 3 -> 4 stays zero: branch 4 fails in island 1, not a descendant of island 2.
  return t;
}

// One short chain and one harmless contingency.
inline ToyBatch chain_and_quiet() {
  auto t = make_batch(
      "chain and quiet",
      {record(0, {ev(0, 0, 0), ev(1, 0, 0), ev(2, 1, 0)}, {{0, 1, 50.0}, {0, 2, 0.0}}, {-1}),
       record(1, {ev(3, 0, 0), ev(4, 0, 0)}, {{0, 1, 0.0}}, {-1})});
  t.at(0, 2) = term(50.0 + 0.0, 2, 1) / 2.0;
  t.at(1, 2) = term(50.0 + 0.0, 2, 1) / 2.0;
  return t;
}

// Three records: a three-stage chain with co-failures, a full blackout, and
// an effect whose island lost nothing while its sibling shed load.
inline ToyBatch three_records() {
  auto t = make_batch(
      "three records",
      {record(0, {ev(0, 0, 0), ev(1, 0, 0), ev(2, 1, 0), ev(3, 1, 0), ev(4, 2, 0)},
              {{0, 1, 12.0}, {0, 2, 6.0}, {0, 3, 0.0}}, {-1}),
       record(1, {ev(3, 0, 0), ev(4, 0, 0), ev(0, 1, 0)}, {{0, 1, 100.0}}, {-1}),
       record(2, {ev(1, 0, 0), ev(2, 0, 0), ev(0, 1, 1)},
              {{1, 1, 0.0}, {2, 1, 40.0}, {1, 2, 0.0}}, {-1, 0, 0})});
  const double chain = term(12.0 + 6.0 + 0.0, 2, 2);
  t.at(0, 2) = chain / 3.0;
  t.at(0, 3) = chain / 3.0;
  t.at(1, 2) = chain / 3.0;
  t.at(1, 3) = chain / 3.0;
  t.at(2, 4) = term(6.0 + 0.0, 2, 1) / 3.0;
  t.at(3, 4) = term(6.0 + 0.0, 2, 1) / 3.0;
  t.at(3, 0) = term(100.0, 2, 1) / 3.0;
  t.at(4, 0) = term(100.0, 2, 1) / 3.0;
  t.at(1, 0) = term(0.0 + 0.0, 2, 1) / 3.0;
  t.at(2, 0) = term(0.0 + 0.0, 2, 1) / 3.0;
  return t;
}

inline std::vector<ToyBatch> all_batches() {
  return {split_islands(), chain_and_quiet(), three_records()};
}

}  // namespace gridcfc::toy
