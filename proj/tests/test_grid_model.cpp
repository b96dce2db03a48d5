#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "gridcfc/error.hpp"
#include "test_support.hpp"

using namespace gridcfc;
using namespace gridcfc::test;

TEST_CASE("ieee118 loads with 186 branches") {
  auto g = ieee118();
  CHECK(g.num_buses() == 118);
  CHECK(g.num_branches() == 186);
  CHECK(g.total_load_mw() == doctest::Approx(4242.0));
  CHECK(g.branch_label(36) == "37(8-30)");
  int xfmr = 0;
  for (const auto& br : g.branches) xfmr += br.transformer;
  CHECK(xfmr == 11);
  for (int l = 0; l < g.num_branches(); ++l) CHECK(g.branches[l].id == l + 1);
}

TEST_CASE("rts96 loads with 73 buses, 120 branches, 8550 MW") {
  auto g = rts96();
  CHECK(g.num_buses() == 73);
  CHECK(g.num_branches() == 120);
  CHECK(g.total_load_mw() == doctest::Approx(8550.0));
}

TEST_CASE("a case without branches is rejected") {
  auto g = buses_only(3);
  try {
    validate_case(g);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidCase);
    CHECK(std::string(e.what()).find("no branches") != std::string::npos);
  }
}

TEST_CASE("validation lists every offending record") {
  auto g = path4();
  g.branches[0].x = 0.0;
  g.branches[2].f_lim2 = 1.0;
  try {
    validate_case(g);
    FAIL("expected an error");
  } catch (const Error& e) {
    std::string msg = e.what();
    CHECK(msg.find("branch 1: zero reactance") != std::string::npos);
    CHECK(msg.find("branch 3: require f_lim2") != std::string::npos);
  }
}

TEST_CASE("matpower parse errors carry line numbers") {
  const std::string text =
      "function mpc = bad\n"
      "mpc.baseMVA = 100;\n"
      "mpc.bus = [\n"
      "  1 3 0 0 0 0 1 1 0 135 1 1.1 0.9;\n"
      "  2 1 10 0 0 0 1 1 0 135 1 1.1 0.9;\n"
      "];\n"
      "mpc.gen = [\n"
      "  1 10 0 100 -100 1 100 1 200 0;\n"
      "];\n"
      "mpc.branch = [\n"
      "  1 7 0.01 0.1 0 100 100 100 0 0 1 -360 360;\n"
      "];\n";
  try {
    parse_matpower(text);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("line 11") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_matpower("mpc.baseMVA = 100;\n"), Error);
}

TEST_CASE("scaling examples") {
  SUBCASE("rts96 load x1.15, limits x0.70") {
    ScaleOptions o;
    o.load_factor = 1.15;
    o.limit_factor = 0.70;
    auto base = rts96();
    auto g = scale_case(base, o);
    CHECK(g.total_load_mw() == doctest::Approx(9832.5));
    for (int l = 0; l < g.num_branches(); ++l) {
      CHECK(g.branches[l].f_lim1 == doctest::Approx(0.70 * base.branches[l].f_lim1));
      CHECK(g.branches[l].f_lim2 == doctest::Approx(0.70 * base.branches[l].f_lim2));
    }
  }
  SUBCASE("uniform 140/450 ratings") {
    ScaleOptions o;
    o.uniform_limits = UniformLimits{140.0, 450.0};
    auto g = scale_case(ieee118(), o);
    for (const auto& br : g.branches) {
      CHECK(br.f_lim1 == (br.transformer ? 450.0 : 140.0));
      CHECK(br.f_lim2 == doctest::Approx(1.5 * br.f_lim1));
    }
  }
  SUBCASE("stressed 118 totals 1.6 x 3733 MW") {
    CHECK(ieee118_stressed().total_load_mw() == doctest::Approx(1.6 * 3733.0));
  }
  SUBCASE("identity") {
    auto base = ieee118();
    CHECK(case_hash(scale_case(base, {})) == case_hash(base));
  }
  SUBCASE("non-positive factor") {
    ScaleOptions o;
    o.load_factor = 0.0;
    CHECK_THROWS_AS(scale_case(path4(), o), Error);
  }
}

TEST_CASE("json round trip preserves the case") {
  for (const auto& base : {ieee118(), rts96()}) {
    auto j = case_to_json(base);
    auto back = case_from_json(nlohmann::json::parse(j.dump()));
    CHECK(case_to_json(back) == j);
    CHECK(case_hash(back) == case_hash(base));
  }
}

TEST_CASE("island examples") {
  auto g = path4();
  SUBCASE("all in service: one island") {
    std::vector<char> mask(3, 1);
    auto t = compute_islands(g, mask);
    CHECK(t.islands.size() == 1);
    CHECK(t.islands[0].id == 0);
  }
  SUBCASE("removing the middle bridge splits into two children") {
    std::vector<char> mask(3, 1);
    auto t0 = compute_islands(g, mask);
    mask[1] = 0;
    auto t1 = compute_islands(g, mask, &t0);
    REQUIRE(t1.islands.size() == 2);
    CHECK(t1.islands[0].id == 1);
    CHECK(t1.islands[1].id == 2);
    CHECK(t1.parent[1] == 0);
    CHECK(t1.parent[2] == 0);
    CHECK(t1.islands[0].buses == std::vector<int>{0, 1});
    CHECK(t1.islands[1].buses == std::vector<int>{2, 3});
  }
  SUBCASE("isolating an end bus leaves a singleton") {
    std::vector<char> mask(3, 1);
    auto t0 = compute_islands(g, mask);
    mask[2] = 0;
    auto t1 = compute_islands(g, mask, &t0);
    REQUIRE(t1.islands.size() == 2);
    CHECK(t1.islands[1].buses == std::vector<int>{3});
  }
  SUBCASE("an unchanged component keeps its id") {
    std::vector<char> mask(3, 1);
    auto t0 = compute_islands(g, mask);
    mask[1] = 0;
    auto t1 = compute_islands(g, mask, &t0);
    mask[2] = 0;
    auto t2 = compute_islands(g, mask, &t1);
    CHECK(t2.island(1).buses == std::vector<int>{0, 1});
    CHECK(t2.islands.size() == 3);
    CHECK(t2.is_descendant_or_self(3, 0));
    CHECK(t2.is_descendant_or_self(3, 2));
    CHECK_FALSE(t2.is_descendant_or_self(3, 1));
  }
  CHECK_THROWS_AS(compute_islands(g, std::vector<char>(2, 1)), Error);
}

TEST_CASE("islands partition the buses and nest in their parents") {
  auto g = ieee118();
  std::mt19937 rng(7);
  std::vector<char> mask(g.num_branches(), 1);
  auto prev = compute_islands(g, mask);
  for (int step = 0; step < 40; ++step) {
    std::uniform_int_distribution<int> pick(0, g.num_branches() - 1);
    for (int k = 0; k < 3; ++k) mask[pick(rng)] = 0;
    auto cur = compute_islands(g, mask, &prev);

    std::vector<int> count(g.num_buses(), 0);
    for (const auto& isl : cur.islands)
      for (int v : isl.buses) {
        ++count[v];
        CHECK(cur.island_of_bus[v] == isl.id);
      }
    CHECK(std::all_of(count.begin(), count.end(), [](int c) { return c == 1; }));

    for (const auto& isl : cur.islands) {
      const int pid = prev.island_of_bus[isl.buses.front()];
      CHECK(cur.is_descendant_or_self(isl.id, pid));
      for (int v : isl.buses) CHECK(prev.island_of_bus[v] == pid);
    }
    for (int l = 0; l < g.num_branches(); ++l)
      if (mask[l])
        CHECK(cur.island_of_bus[g.branches[l].from] == cur.island_of_bus[g.branches[l].to]);
    prev = std::move(cur);
  }
}
