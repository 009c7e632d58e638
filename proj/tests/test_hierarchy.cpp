#include <gtest/gtest.h>

#include <set>

#include "homnet/error.hpp"
#include "homnet/hierarchy.hpp"
#include "homnet/mfcf.hpp"
#include "oracles.hpp"

using namespace homnet;

TEST(FromCliques, SingleFourClique) {
  const auto h = from_cliques({{0, 1, 2, 3}}, 4);
  ASSERT_EQ(h.k_max(), 4);
  EXPECT_EQ(h.units(1), 4u);
  EXPECT_EQ(h.units(2), 6u);
  EXPECT_EQ(h.units(3), 4u);
  EXPECT_EQ(h.units(4), 1u);
  EXPECT_EQ(h.edges[3].size(), 4u);
  EXPECT_TRUE(check_hierarchy(h).ok());
}

TEST(FromCliques, OverlapIsDeduplicated) {
  const auto h = from_cliques({{0, 1, 2}, {1, 2, 3}}, 4);
  EXPECT_EQ(h.orders[1], (std::vector<VarSet>{{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}}));
}

TEST(FromCliques, LexicographicOrderAndEdges) {
  const auto h = from_cliques({{2, 4, 7}}, 8);
  EXPECT_EQ(h.orders[0].size(), 8u);
  EXPECT_EQ(h.orders[1], (std::vector<VarSet>{{2, 4}, {2, 7}, {4, 7}}));
  for (auto [child, parent] : h.edges[1]) {
    const auto& c = h.orders[1][static_cast<std::size_t>(child)];
    const auto& par = h.orders[0][static_cast<std::size_t>(parent)];
    EXPECT_TRUE(std::includes(c.begin(), c.end(), par.begin(), par.end()));
  }
}

TEST(FromCliques, ForestsAreDownwardClosed) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const int p = 4 + static_cast<int>(seed % 20);
    MfcfConfig cfg;
    cfg.max_clique_size = 2 + static_cast<int>(seed % 4);
    const auto forest = build_mfcf(DependencyMatrix{oracle::random_dependency(p, seed)}, cfg);
    const auto h = from_cliques(forest.cliques, p);
    const auto check = check_hierarchy(h);
    EXPECT_TRUE(check.ok()) << "seed " << seed;
    EXPECT_LE(h.k_max(), cfg.max_clique_size);
    // Every subset of every unit is present.
    for (int k = 2; k <= h.k_max(); ++k)
      for (const auto& unit : h.orders[static_cast<std::size_t>(k - 1)])
        for (std::size_t drop = 0; drop < unit.size(); ++drop) {
          VarSet sub = unit;
          sub.erase(sub.begin() + static_cast<long>(drop));
          EXPECT_GE(h.find(sub), 0);
        }
  }
}

TEST(CheckHierarchy, DetectsMissingSubset) {
  auto h = from_cliques({{0, 1, 2}}, 3);
  h.orders[1].erase(h.orders[1].begin());
  EXPECT_FALSE(check_hierarchy(h).ok());
}

TEST(Union, Idempotent) {
  const auto h = from_cliques({{0, 1, 2}, {2, 3}}, 5);
  EXPECT_EQ(hierarchy_union(h, h), h);
  EXPECT_EQ(param_count(hierarchy_union(h, h)), param_count(h));
}

TEST(Union, DisjointSizesAdd) {
  const auto a = from_cliques({{0, 1, 2}}, 6), b = from_cliques({{3, 4, 5}}, 6);
  const auto u = hierarchy_union(a, b);
  EXPECT_EQ(u.units(2), 6u);
  EXPECT_EQ(u.units(3), 2u);
  EXPECT_EQ(u.units(1), 6u);
}

TEST(Union, AtLeastAsLargeAsEither) {
  homnet::Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const int p = 10;
    auto draw = [&] {
      std::vector<VarSet> cl;
      for (int c = 0; c < 3; ++c) {
        auto s = rng.sample_without_replacement(p, 1 + static_cast<int>(rng.below(4)));
        std::sort(s.begin(), s.end());
        cl.push_back(s);
      }
      return from_cliques(cl, p);
    };
    const auto a = draw(), b = draw();
    const auto u = hierarchy_union(a, b);
    EXPECT_TRUE(check_hierarchy(u).ok());
    EXPECT_EQ(u.k_max(), std::max(a.k_max(), b.k_max()));
    for (int k = 1; k <= u.k_max(); ++k) EXPECT_GE(u.units(k), std::max(a.units(k), b.units(k)));
  }
}

TEST(Union, DimensionMismatch) {
  EXPECT_THROW(hierarchy_union(from_cliques({{0, 1}}, 3), from_cliques({{0, 1}}, 4)), ConfigError);
}

TEST(Oracle, PairsOnly) {
  const auto h = oracle_hierarchy({{0, 1}, {1, 2}}, 5);
  EXPECT_EQ(h.units(2), 2u);
  EXPECT_EQ(h.units(1), 5u);
  EXPECT_EQ(h.k_max(), 2);
}

TEST(Oracle, EnforcesClosure) {
  const auto h = oracle_hierarchy({{0, 1, 2}}, 3);
  EXPECT_EQ(h.orders[1], (std::vector<VarSet>{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(Randomize, PreservesWidthsAndInDegrees) {
  const auto h = from_cliques({{0, 1, 2, 3}, {3, 4, 5}, {5, 6}}, 8);
  const Wiring orig = h.wiring();
  const Wiring r = randomize(h, 5);
  EXPECT_EQ(r.widths, orig.widths);
  for (int k = 2; k <= h.k_max(); ++k) {
    const auto& layer = r.parents[static_cast<std::size_t>(k - 1)];
    for (const auto& ps : layer) {
      EXPECT_EQ(ps.size(), static_cast<std::size_t>(k));
      EXPECT_TRUE(std::is_sorted(ps.begin(), ps.end()));
      EXPECT_EQ(std::set<int>(ps.begin(), ps.end()).size(), ps.size());
      for (int q : ps) EXPECT_LT(q, orig.widths[static_cast<std::size_t>(k - 2)]);
    }
  }
  EXPECT_EQ(param_count(r), param_count(h));
}

TEST(Randomize, DeterministicAndActuallyRewired) {
  const auto h = from_cliques({{0, 1, 2, 3}, {2, 3, 4, 5}, {5, 6, 7}}, 8);
  EXPECT_EQ(randomize(h, 3).parents, randomize(h, 3).parents);
  int differs = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    if (randomize(h, seed).parents != h.wiring().parents) ++differs;
  EXPECT_EQ(differs, 20);
}

TEST(ParamCount, SingleFourClique) {
  EXPECT_EQ(param_count(from_cliques({{0, 1, 2, 3}}, 4)), 57u);
}

TEST(ParamCount, MatchesEnumeration) {
  homnet::Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 3 + static_cast<int>(rng.below(10));
    std::vector<VarSet> cliques;
    const int count = 1 + static_cast<int>(rng.below(5));
    for (int c = 0; c < count; ++c) {
      auto s = rng.sample_without_replacement(p, 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(p, 5) - 1))));
      std::sort(s.begin(), s.end());
      cliques.push_back(s);
    }
    const auto h = from_cliques(cliques, p);
    EXPECT_EQ(param_count(h), oracle::enumerated_param_count(cliques, p)) << "trial " << trial;
    std::size_t edges = 0, expected = 0;
    for (int k = 2; k <= h.k_max(); ++k) {
      edges += h.edges[static_cast<std::size_t>(k - 1)].size();
      expected += static_cast<std::size_t>(k) * h.units(k);
    }
    EXPECT_EQ(edges, expected);
  }
}

TEST(Hierarchy, RelabelingGivesIsomorphicShape) {
  const std::vector<VarSet> cliques = {{0, 1, 2}, {2, 3}, {3, 4, 5}};
  const std::vector<int> relabel = {5, 3, 0, 4, 1, 2};
  std::vector<VarSet> moved;
  for (auto c : cliques) {
    for (int& v : c) v = relabel[static_cast<std::size_t>(v)];
    std::sort(c.begin(), c.end());
    moved.push_back(c);
  }
  const auto a = from_cliques(cliques, 6), b = from_cliques(moved, 6);
  ASSERT_EQ(a.k_max(), b.k_max());
  for (int k = 1; k <= a.k_max(); ++k) EXPECT_EQ(a.units(k), b.units(k));
  EXPECT_EQ(param_count(a), param_count(b));
}

TEST(Hierarchy, JsonRoundTrip) {
  const auto h = from_cliques({{0, 1, 2}, {2, 3}}, 5);
  EXPECT_EQ(hierarchy_from_json(to_json(h)), h);
}
