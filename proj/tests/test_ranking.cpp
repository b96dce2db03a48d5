#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gridcfc/error.hpp"
#include "gridcfc/ranking.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace gridcfc;
using namespace gridcfc::test;
namespace fs = std::filesystem;

namespace {

WeightMatrix random_digraph(std::mt19937_64& rng, int n, double density) {
  WeightMatrix w{n, std::vector<double>(static_cast<size_t>(n) * n, 0.0)};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // A directed ring keeps the support strongly connected.
  for (int i = 0; i < n; ++i) w.at(i, (i + 1) % n) = std::exp(4.0 * u(rng));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && u(rng) < density) w.at(i, j) = std::exp(4.0 * u(rng));
  return w;
}

Eigen::MatrixXd dense(const WeightMatrix& w) {
  Eigen::MatrixXd m(w.n, w.n);
  for (int i = 0; i < w.n; ++i)
    for (int j = 0; j < w.n; ++j) m(i, j) = w.at(i, j);
  return m;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "gridcfc_test_ranking";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("regularisation fills zeros off the diagonal") {
  WeightMatrix zero{3, std::vector<double>(9, 0.0)};
  const auto r = regularize(zero);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(r.at(i, j) == (i == j ? 0.0 : 1e-6));

  WeightMatrix w{3, {0, 0.3, 0, 0, 0, 2.0, 0, 0, 0}};
  CHECK_FALSE(strongly_connected(w));
  const auto rw = regularize(w);
  CHECK(rw.at(0, 1) == 0.3);
  CHECK(rw.at(1, 2) == 2.0);
  CHECK(rw.at(2, 0) == doctest::Approx(2e-6).epsilon(1e-15));
  CHECK(rw.at(1, 1) == 0.0);
  CHECK(strongly_connected(rw));
  CHECK(regularize(w, 0.01).at(2, 1) == 0.01);
}

TEST_CASE("strong connectivity check") {
  WeightMatrix cycle{3, {0, 1, 0, 0, 0, 1, 1, 0, 0}};
  CHECK(strongly_connected(cycle));
  cycle.at(2, 0) = 0.0;
  CHECK_FALSE(strongly_connected(cycle));
}

TEST_CASE("fixed point agrees with dense brute force") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + trial % 15;
    const auto w = random_digraph(rng, n, 0.3);
    const auto r = weighted_hits(w, {1e-13, 100000});
    INFO("trial " << trial << " n " << n << " last residual " << r.residuals.back());
    REQUIRE(r.converged);
    const auto ref = oracle::hits_by_iteration(dense(w));
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(r.auth[i] - ref.auth[i]) < 1e-8);
      CHECK(std::abs(r.hub[i] - ref.hub[i]) < 1e-8);
      CHECK(r.auth[i] > 0.0);
      CHECK(r.hub[i] > 0.0);
      CHECK(r.k[i] == doctest::Approx((r.auth[i] + r.hub[i]) / 2.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("scaling the weights changes nothing") {
  std::mt19937_64 rng(5);
  const auto w = random_digraph(rng, 12, 0.4);
  auto scaled = w;
  for (double& x : scaled.w) x *= 37.5;
  const auto a = weighted_hits(w, {1e-13, 100000});
  const auto b = weighted_hits(scaled, {1e-13, 100000});
  for (int i = 0; i < 12; ++i) {
    CHECK(std::abs(a.auth[i] - b.auth[i]) < 1e-12);
    CHECK(std::abs(a.hub[i] - b.hub[i]) < 1e-12);
  }
  CHECK(a.order == b.order);
}

TEST_CASE("uniform matrix gives uniform scores in one step") {
  WeightMatrix w{4, std::vector<double>(16, 1.0)};
  for (int i = 0; i < 4; ++i) w.at(i, i) = 0.0;
  const auto r = weighted_hits(w);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  for (int i = 0; i < 4; ++i) CHECK(r.auth[i] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.order == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("a star centre is the strongest hub") {
  WeightMatrix w{5, std::vector<double>(25, 0.0)};
  for (int j = 1; j < 5; ++j) w.at(0, j) = 1.0;
  w.at(4, 0) = 0.1;
  const auto r = weighted_hits(regularize(w, 0.01), {1e-12, 100000});
  CHECK(r.converged);
  for (int j = 1; j < 5; ++j) CHECK(r.hub[0] > r.hub[j]);
}

TEST_CASE("iteration limit is reported") {
  std::mt19937_64 rng(8);
  const auto w = regularize(random_digraph(rng, 10, 0.3));
  const auto r = weighted_hits(w, {1e-15, 3});
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 3);
  CHECK(r.residuals.size() == 3);
  CHECK_THROWS_AS(weighted_hits(w, {0.0, 10}), Error);
  CHECK_THROWS_AS(weighted_hits(w, {1e-5, 0}), Error);
  auto bad = w;
  bad.at(0, 1) = -1.0;
  CHECK_THROWS_AS(weighted_hits(bad), Error);
}

TEST_CASE("ordering breaks ties by index") {
  CHECK(order_by_score({0.2, 0.5, 0.2, 0.9}) == std::vector<int>{3, 1, 0, 2});
}

TEST_CASE("rank groups") {
  std::vector<int> order(40);
  for (int k = 0; k < 40; ++k) order[k] = 39 - k;
  CHECK(select_group(order, RankGroup::Top, 3) == std::vector<int>{39, 38, 37});
  CHECK(select_group(order, RankGroup::Middle, 2) == std::vector<int>{25, 24});
  CHECK(select_group(order, RankGroup::Bottom, 2) == std::vector<int>{1, 0});
  CHECK(select_group(order, RankGroup::Top, 0).empty());
  CHECK_THROWS_AS(select_group(order, RankGroup::Middle, 30), Error);
  CHECK_THROWS_AS(select_group(order, RankGroup::Top, 41), Error);
  CHECK(parse_rank_group("middle") == RankGroup::Middle);
  CHECK(std::string(to_string(RankGroup::Bottom)) == "bottom");
  CHECK_THROWS_AS(parse_rank_group("upper"), Error);
}

TEST_CASE("ranking file round trip") {
  auto g = buses_only(3);
  add_branch(g, 0, 1);
  add_branch(g, 1, 2);
  add_branch(g, 0, 2);
  WeightMatrix w{3, {0, 1, 2, 0.5, 0, 0, 3, 0, 0}};
  const auto r = weighted_hits(regularize(w));
  const auto path = scratch("ranking.csv");
  write_ranking_csv(r, g, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "rank,branch,from,to,auth,hub,K");
  CHECK(read_order_csv(path, 3) == r.order);
  CHECK_THROWS_AS(read_order_csv(path, 2), Error);
  std::ofstream(scratch("dup.csv")) << "rank,branch\n1,1\n2,1\n";
  CHECK_THROWS_AS(read_order_csv(scratch("dup.csv"), 3), Error);
}
