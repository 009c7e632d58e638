#include <gtest/gtest.h>

#include <set>

#include "homnet/error.hpp"
#include "homnet/mfcf.hpp"
#include "oracles.hpp"

using namespace homnet;

namespace {

DependencyMatrix dep(const Matrix& m) { return DependencyMatrix{m}; }

MfcfConfig config(int k, double threshold = 0.0) {
  MfcfConfig c;
  c.max_clique_size = k;
  c.gain_threshold = threshold;
  return c;
}

}  // namespace

TEST(Mfcf, TwoCliqueSizeGivesMaximumSpanningTree) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int p = 3 + static_cast<int>(seed % 17);
    const Matrix m = oracle::random_dependency(p, seed);
    const auto forest = build_mfcf(dep(m), config(2));
    const auto edges = induced_edges(forest);
    EXPECT_EQ(edges, oracle::max_spanning_tree(m)) << "seed " << seed;
    EXPECT_EQ(edges.size(), static_cast<std::size_t>(p - 1));
  }
}

TEST(Mfcf, UniformStrongDependenceGivesOneClique) {
  Matrix m = Matrix::Constant(4, 4, 0.9);
  m.diagonal().setOnes();
  const auto forest = build_mfcf(dep(m), config(4));
  ASSERT_EQ(forest.cliques.size(), 1u);
  EXPECT_EQ(forest.cliques[0], (VarSet{0, 1, 2, 3}));
  EXPECT_TRUE(validate_forest(forest, 4, 4).ok());
}

TEST(Mfcf, NoPositiveGainGivesSingletons) {
  const Matrix m = Matrix::Identity(3, 3);
  const auto forest = build_mfcf(dep(m), config(4));
  ASSERT_EQ(forest.cliques.size(), 3u);
  for (const auto& c : forest.cliques) EXPECT_EQ(c.size(), 1u);
  for (int a : forest.attachment) EXPECT_EQ(a, -1);
  for (const auto& r : forest.insertion_log) EXPECT_EQ(r.gain, kNoPositiveGain);
  EXPECT_TRUE(validate_forest(forest, 3, 4).ok());
}

TEST(Mfcf, RootIsLargestRowSum) {
  Matrix m = Matrix::Identity(4, 4);
  m(2, 3) = m(3, 2) = 0.8;
  m(2, 0) = m(0, 2) = 0.3;
  m(1, 3) = m(3, 1) = 0.2;
  const auto forest = build_mfcf(dep(m), config(3));
  EXPECT_EQ(forest.insertion_log.front().vertex, 2);
}

TEST(Mfcf, GrowsOnePairAtATimeWhenK2) {
  Matrix m = Matrix::Identity(3, 3);
  m(0, 1) = m(1, 0) = 0.5;
  m(1, 2) = m(2, 1) = 0.4;
  m(0, 2) = m(2, 0) = 0.1;
  const auto forest = build_mfcf(dep(m), config(2));
  EXPECT_EQ(forest.cliques, (std::vector<VarSet>{{0, 1}, {1, 2}}));
  EXPECT_EQ(forest.separators[1], (VarSet{1}));
  EXPECT_EQ(forest.attachment[1], 0);
}

TEST(Mfcf, ThresholdBlocksWeakEdges) {
  Matrix m = Matrix::Identity(4, 4);
  m(0, 1) = m(1, 0) = 0.5;
  m(2, 3) = m(3, 2) = 0.05;
  const auto forest = build_mfcf(dep(m), config(3, 0.1));
  std::set<VarSet> cliques(forest.cliques.begin(), forest.cliques.end());
  EXPECT_TRUE(cliques.count({0, 1}));
  EXPECT_TRUE(cliques.count({2}));
  EXPECT_TRUE(cliques.count({3}));
  for (const auto& r : forest.insertion_log)
    if (r.gain != kNoPositiveGain) EXPECT_GT(r.gain, 0.1);
}

TEST(Mfcf, RandomMatricesValidate) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const int p = 2 + static_cast<int>(seed % 29);
    const int k = 2 + static_cast<int>(seed % 3);
    const auto forest = build_mfcf(dep(oracle::random_dependency(p, seed + 100)), config(k));
    const auto report = validate_forest(forest, p, k);
    EXPECT_TRUE(report.ok()) << "seed " << seed;
    EXPECT_TRUE(oracle::mcs_chordal(p, induced_edges(forest)));
    EXPECT_LE(forest.cliques.size(), static_cast<std::size_t>(p));
    EXPECT_EQ(forest.insertion_log.size(), static_cast<std::size_t>(p));
    const auto budget = static_cast<std::size_t>(p * (k - 1) - k * (k - 1) / 2);
    if (p >= k) EXPECT_LE(induced_edges(forest).size(), budget);
    for (std::size_t i = 0; i < forest.cliques.size(); ++i) {
      const auto& sep = forest.separators[i];
      EXPECT_LT(sep.size(), forest.cliques[i].size());
    }
  }
}

TEST(Mfcf, Deterministic) {
  const Matrix m = oracle::random_dependency(25, 77);
  const auto a = build_mfcf(dep(m), config(4), 3), b = build_mfcf(dep(m), config(4), 3);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Mfcf, RandomizedTiesStayValid) {
  Matrix m = Matrix::Constant(8, 8, 0.5);
  m.diagonal().setOnes();
  MfcfConfig cfg = config(3);
  cfg.randomize_ties = true;
  const auto a = build_mfcf(dep(m), cfg, 1);
  EXPECT_TRUE(validate_forest(a, 8, 3).ok());
  EXPECT_EQ(to_json(a).dump(), to_json(build_mfcf(dep(m), cfg, 1)).dump());
}

TEST(Mfcf, ConfigValidation) {
  EXPECT_THROW(config(1).validate(), ConfigError);
  MfcfConfig c = config(3);
  c.min_clique_size = 4;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Mfcf, JsonRoundTrip) {
  const auto forest = build_mfcf(dep(oracle::random_dependency(12, 5)), config(4));
  const auto back = forest_from_json(to_json(forest));
  EXPECT_EQ(back.cliques, forest.cliques);
  EXPECT_EQ(back.separators, forest.separators);
  EXPECT_EQ(back.attachment, forest.attachment);
  ASSERT_EQ(back.insertion_log.size(), forest.insertion_log.size());
  for (std::size_t i = 0; i < back.insertion_log.size(); ++i) {
    EXPECT_EQ(back.insertion_log[i].vertex, forest.insertion_log[i].vertex);
    EXPECT_EQ(back.insertion_log[i].gain, forest.insertion_log[i].gain);
  }
}

TEST(Validate, SeparatorOutsideParentFails) {
  CliqueForest f;
  f.p = 4;
  f.cliques = {{0, 1, 2}, {1, 3}};
  f.separators = {{}, {3}};
  f.attachment = {-1, 0};
  const auto report = validate_forest(f, 4, 3);
  EXPECT_FALSE(report.separators_valid);
  EXPECT_FALSE(report.ok());
}

TEST(Validate, BrokenRunningIntersection) {
  // Vertex 0 sits in cliques 0 and 2 but not in the clique between them.
  CliqueForest f;
  f.p = 4;
  f.cliques = {{0, 1}, {1, 2}, {0, 2, 3}};
  f.separators = {{}, {1}, {2}};
  f.attachment = {-1, 0, 1};
  const auto report = validate_forest(f, 4, 3);
  EXPECT_FALSE(report.running_intersection);
}

TEST(Validate, CompleteClique) {
  CliqueForest f;
  f.p = 6;
  f.cliques = {{0, 1, 2, 3, 4, 5}};
  f.separators = {{}};
  f.attachment = {-1};
  EXPECT_TRUE(validate_forest(f, 6, 6).ok());
  EXPECT_FALSE(validate_forest(f, 6, 5).size_bound);
  EXPECT_FALSE(validate_forest(f, 7, 6).spanning);
}

TEST(InducedEdges, SmallCases) {
  EXPECT_EQ(induced_edges(std::vector<VarSet>{{0, 1, 2}}), (std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}}));
  EXPECT_EQ(induced_edges(std::vector<VarSet>{{0, 1}, {1, 2}}), (std::vector<Edge>{{0, 1}, {1, 2}}));
}

TEST(Chordality, AgreesWithSearchOracle) {
  EXPECT_FALSE(is_chordal(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}));
  EXPECT_TRUE(is_chordal(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 2}}));
  homnet::Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const int p = 3 + static_cast<int>(rng.below(8));
    std::vector<Edge> edges;
    const double prob = rng.uniform(0.2, 0.8);
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j)
        if (rng.bernoulli(prob)) edges.push_back({i, j});
    EXPECT_EQ(is_chordal(p, edges), oracle::mcs_chordal(p, edges)) << "trial " << trial;
  }
}
