#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gridcfc/error.hpp"
#include "gridcfc/ranking.hpp"
#include "gridcfc/structural.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace gridcfc;
using namespace gridcfc::test;
namespace fs = std::filesystem;

namespace {

double rel_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 0.0, gap = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    scale = std::max(scale, std::abs(b[k]));
    gap = std::max(gap, std::abs(a[k] - b[k]));
  }
  return scale > 0.0 ? gap / scale : gap;
}

}  // namespace

TEST_CASE("hop betweenness on a path and a diamond") {
  const auto g = path4();  // 0-1-2-3
  const auto s = betweenness(g);
  CHECK(s.score == std::vector<double>{3.0, 4.0, 3.0});
  CHECK(s.order == std::vector<int>{1, 0, 2});

  auto d = buses_only(4);
  add_branch(d, 0, 1);
  add_branch(d, 1, 3);
  add_branch(d, 0, 2);
  add_branch(d, 2, 3);
  const auto sd = betweenness(d);
  for (double x : sd.score) CHECK(x == doctest::Approx(2.0));
}

TEST_CASE("parallel branches split the paths between them") {
  auto g = buses_only(3);
  add_branch(g, 0, 1);
  add_branch(g, 0, 1);
  add_branch(g, 1, 2);
  const auto s = betweenness(g);
  CHECK(s.score[0] == doctest::Approx(1.0));
  CHECK(s.score[1] == doctest::Approx(1.0));
  CHECK(s.score[2] == doctest::Approx(2.0));
}

TEST_CASE("betweenness matches path enumeration on random multigraphs") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = oracle::random_connected_case(rng, 4 + trial % 9, trial % 6);
    CHECK(rel_gap(betweenness(g).score, oracle::betweenness_by_enumeration(g)) <= 1e-12);
  }
}

TEST_CASE("shift factors carry the full injection across a cut") {
  const auto g = path4();
  const auto sf = shift_factors(g);
  const int slack = sf.slack_of_bus[0];
  for (int bus = 0; bus < 4; ++bus) {
    CHECK(sf.slack_of_bus[bus] == slack);
    for (int l = 0; l < 3; ++l) {
      const auto& br = g.branches[l];
      const bool between = (std::min(bus, slack) <= br.from && std::max(bus, slack) >= br.to);
      CHECK(std::abs(sf.at(l, bus)) == doctest::Approx(between ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("transfer based scores do not depend on the slack") {
  std::mt19937_64 rng(3);
  const auto g = oracle::random_connected_case(rng, 12, 6);
  const auto b2 = electrical_betweenness(g).score;
  const auto b3 = extended_betweenness(g).score;
  for (int slack : {0, 5, 11}) {
    StructuralOptions o;
    o.slack_bus = slack;
    CHECK(rel_gap(electrical_betweenness(g, o).score, b2) <= 1e-9);
    CHECK(rel_gap(extended_betweenness(g, o).score, b3) <= 1e-9);
  }
}

TEST_CASE("transfer based scores match the dense pseudo-inverse") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 25; ++trial) {
    const auto g = oracle::random_connected_case(rng, 5 + trial % 10, trial % 5);
    CHECK(rel_gap(electrical_betweenness(g).score, oracle::electrical_betweenness_dense(g)) <= 1e-9);
    CHECK(rel_gap(extended_betweenness(g).score, oracle::extended_betweenness_dense(g)) <= 1e-9);
    StructuralOptions rt;
    rt.realtime_output = true;
    CHECK(rel_gap(electrical_betweenness(g, rt).score,
                  oracle::electrical_betweenness_dense(g, true)) <= 1e-9);
  }
}

TEST_CASE("118-bus baselines are complete rankings") {
  const auto g = ieee118_stressed();
  for (const char* tag : {"b1", "b2", "b3"}) {
    const auto s = structural_scores(g, parse_structural_metric(tag));
    CHECK(std::string(to_string(s.metric)) == tag);
    REQUIRE(s.score.size() == 186);
    CHECK(s.order == order_by_score(s.score));
    for (double x : s.score) CHECK(x >= 0.0);
    CHECK(s.score[s.order.front()] > 0.0);
  }
  CHECK_THROWS_AS(parse_structural_metric("b4"), Error);
}

TEST_CASE("scores file feeds back as an order") {
  const auto g = path4();
  const auto s = betweenness(g);
  const auto path = fs::temp_directory_path() / "gridcfc_test_structural_b1.csv";
  write_scores_csv(s, g, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "rank,branch,from,to,b1");
  CHECK(read_order_csv(path, 3) == s.order);
}
