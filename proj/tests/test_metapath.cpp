#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lamp/error.hpp"
#include "lamp/metapath.hpp"
#include "oracles.hpp"

using namespace lamp;

namespace {

const std::string kFixture = std::string(LAMP_FIXTURE_DIR) + "/toy_acm.json";

using PairCounts = std::map<std::pair<int, int>, std::uint64_t>;

PairCounts as_map(const MetaPathSubGraph& sg) {
  PairCounts out;
  for (std::size_t e = 0; e < sg.edges.size(); ++e) out[sg.edges[e]] = sg.counts.empty() ? 1 : sg.counts[e];
  return out;
}

struct Toy {
  Hin hin = load_hin(kFixture);
  MetaPathSubGraph pap = materialize(hin, metapath_from_shorthand(hin, "PAP"));
  MetaPathSubGraph psp = materialize(hin, metapath_from_shorthand(hin, "PSP"));
  MetaPathSubGraph papap = materialize(hin, metapath_from_shorthand(hin, "PAPAP"));
};

}  // namespace

TEST_CASE("toy PAP and PSP") {
  Toy t;
  CHECK(as_map(t.pap) == PairCounts{{{0, 1}, 1}, {{1, 2}, 1}});
  CHECK(as_map(t.psp) == PairCounts{{{0, 2}, 1}});
  CHECK(t.pap.n == 3);
}

TEST_CASE("toy PAPAP counts typed walks and drops self pairs") {
  Toy t;
  CHECK(as_map(t.papap) == PairCounts{{{0, 1}, 3}, {{0, 2}, 1}, {{1, 2}, 3}});
  CHECK(as_map(t.papap) == oracle::instance_counts(t.hin, t.papap.metapath));
}

TEST_CASE("meta-path parsing") {
  Toy t;
  auto mp = parse_metapath(t.hin, "PAP=PA,~PA");
  CHECK(mp.name == "PAP");
  REQUIRE(mp.steps.size() == 2);
  CHECK(mp.steps[0] == MetaPathStep{0, Direction::forward});
  CHECK(mp.steps[1] == MetaPathStep{0, Direction::reverse});
  CHECK(is_palindromic(t.hin, mp));
  auto list = parse_metapath_list(t.hin, "PAP,PSP");
  REQUIRE(list.size() == 2);
  CHECK(list[1].name == "PSP");
  auto explicit_list = parse_metapath_list(t.hin, "X=PA,~PA;Y=PS,~PS");
  REQUIRE(explicit_list.size() == 2);
  CHECK(explicit_list[0].steps == list[0].steps);
  CHECK_THROWS_AS(parse_metapath(t.hin, "BAD=PA,PA"), DataError);
  CHECK_THROWS(metapath_from_shorthand(t.hin, "PAS"));
}

TEST_CASE("integrate toy sub-graphs") {
  Toy t;
  auto g = integrate({t.pap, t.psp, t.papap});
  REQUIRE(g.edges.size() == 3);
  std::map<std::pair<int, int>, std::vector<std::uint8_t>> enc;
  for (std::size_t e = 0; e < g.edges.size(); ++e) enc[g.edges[e]] = g.encoding(e);
  CHECK(enc[{0, 1}] == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(enc[{1, 2}] == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(enc[{0, 2}] == std::vector<std::uint8_t>{0, 1, 1});

  auto single = integrate({t.pap});
  CHECK(single.edges == t.pap.edges);
  for (std::size_t e = 0; e < single.edges.size(); ++e) CHECK(single.encoding(e) == std::vector<std::uint8_t>{1});
  CHECK_THROWS(integrate({}));
}

TEST_CASE("connectivity vector") {
  Toy t;
  CHECK(connectivity_vector({t.pap, t.psp, t.papap}, 0) == std::map<int, int>{{1, 2}, {2, 2}});
  for (int i = 0; i < 3; ++i)
    for (const auto& [j, c] : connectivity_vector({t.pap}, i)) CHECK((c == 0 || c == 1));
  MetaPathSubGraph empty;
  empty.n = 3;
  CHECK(connectivity_vector({empty, empty}, 0).empty());
}

TEST_CASE("homophily ratio") {
  Toy t;
  CHECK(homophily_ratio(t.pap, t.hin.target_labels()) == doctest::Approx(0.5));
  CHECK(homophily_ratio(t.pap, {0, 0, 0}) == 1.0);
}

TEST_CASE("jaccard and coverage") {
  Toy t;
  CHECK(jaccard_similarity(t.pap, t.psp) == 0.0);
  CHECK(jaccard_similarity(t.psp, t.papap) == doctest::Approx(1.0 / 3.0));
  CHECK(jaccard_similarity(t.pap, t.pap) == 1.0);
  CHECK(coverage_ratio(t.pap, t.pap) == 1.0);
  CHECK(coverage_ratio(t.papap, t.psp) == 1.0);
  CHECK(coverage_ratio(t.psp, t.papap) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("combination enumeration") {
  CHECK(enumerate_combinations(5, 2).size() == 26);
  CHECK(enumerate_combinations(3, 1).size() == 7);
  auto full = enumerate_combinations(5, 5);
  REQUIRE(full.size() == 1);
  CHECK(full[0] == std::vector<int>{0, 1, 2, 3, 4});
  auto c = enumerate_combinations(3, 2);
  CHECK(c == std::vector<std::vector<int>>{{0, 1}, {0, 2}, {1, 2}, {0, 1, 2}});
}

TEST_CASE("spgemm budget and boolean mode") {
  Toy t;
  auto a = step_adjacency(t.hin, {0, Direction::forward});
  auto b = step_adjacency(t.hin, {0, Direction::reverse});
  CHECK(a.rows == 3);
  CHECK(a.cols == 2);
  auto c = spgemm(a, b, false, 100);
  auto cb = spgemm(a, b, true, 100);
  CHECK(c.matrix.col == cb.matrix.col);
  for (auto v : cb.matrix.val) CHECK(v == 1);
  CHECK_THROWS_AS(spgemm(a, b, false, 2), ResourceError);
}

TEST_CASE("random HINs match exhaustive enumeration") {
  Rng rng(7);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Hin hin = oracle::random_hin(rng);
    hin.rebuild_index();
    MetaPath mp = oracle::random_metapath(hin, rng);
    if (mp.steps.empty()) continue;
    auto sg = materialize(hin, mp);
    CHECK(as_map(sg) == oracle::instance_counts(hin, mp));
    ++checked;
  }
  CHECK(checked >= 150);
}

TEST_CASE("integration invariants on random HINs") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Hin hin = oracle::random_hin(rng);
    hin.rebuild_index();
    std::vector<MetaPathSubGraph> sgs;
    for (int k = 0; k < 3; ++k) {
      MetaPath mp = oracle::random_metapath(hin, rng);
      if (!mp.steps.empty()) sgs.push_back(materialize(hin, mp));
    }
    if (sgs.size() < 2) continue;
    auto g = integrate(sgs);

    std::set<std::pair<int, int>> uni;
    for (const auto& sg : sgs) uni.insert(sg.edges.begin(), sg.edges.end());
    CHECK(std::set<std::pair<int, int>>(g.edges.begin(), g.edges.end()) == uni);

    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      auto enc = g.encoding(e);
      CHECK(std::accumulate(enc.begin(), enc.end(), 0) > 0);
      for (std::size_t m = 0; m < sgs.size(); ++m)
        CHECK(static_cast<bool>(enc[m]) == std::binary_search(sgs[m].edges.begin(), sgs[m].edges.end(), g.edges[e]));
    }

    std::vector<MetaPathSubGraph> rev(sgs.rbegin(), sgs.rend());
    auto gr = integrate(rev);
    REQUIRE(gr.edges == g.edges);
    for (std::size_t e = 0; e < g.edges.size(); ++e)
      for (std::size_t m = 0; m < sgs.size(); ++m) CHECK(gr.encoding(e, sgs.size() - 1 - m) == g.encoding(e, m));

    for (std::size_t drop = 0; drop < sgs.size(); ++drop) {
      std::vector<MetaPathSubGraph> rest;
      for (std::size_t m = 0; m < sgs.size(); ++m)
        if (m != drop) rest.push_back(sgs[m]);
      auto gd = integrate(rest);
      std::set<std::pair<int, int>> kept(gd.edges.begin(), gd.edges.end());
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        int others = 0;
        for (std::size_t m = 0; m < sgs.size(); ++m)
          if (m != drop) others += g.encoding(e, m);
        if (others > 0) CHECK(kept.count(g.edges[e]) == 1);
      }
    }

    for (int i = 0; i < static_cast<int>(g.n); ++i) {
      int deg = 0;
      for (const auto& sg : sgs)
        for (const auto& [u, v] : sg.edges) deg += (u == i) + (v == i);
      int sum = 0;
      for (const auto& [j, c] : connectivity_vector(sgs, i)) sum += c;
      CHECK(sum == deg);
    }
    if (!sgs[0].edges.empty() || !sgs[1].edges.empty())
      CHECK(jaccard_similarity(sgs[0], sgs[1]) == jaccard_similarity(sgs[1], sgs[0]));
    else
      CHECK_THROWS_AS(jaccard_similarity(sgs[0], sgs[1]), ArgumentError);
    const double cov = sgs[1].edges.empty() ? 1.0 : coverage_ratio(sgs[0], sgs[1]);
    CHECK(cov >= 0.0);
    CHECK(cov <= 1.0);
  }
}
