#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "homnet/error.hpp"
#include "homnet/hierarchy.hpp"
#include "homnet/synth.hpp"
#include "oracles.hpp"

using namespace homnet;

TEST(Graph, EdgeDensityMatchesProbability) {
  // p = 50: edge probability 0.16 over 1225 pairs.
  const double pairs = 1225.0, prob = 0.16;
  double total = 0.0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) total += static_cast<double>(gen_graph(50, static_cast<std::uint64_t>(s)).size());
  const double mean = total / seeds;
  const double se = std::sqrt(pairs * prob * (1.0 - prob) / seeds);
  EXPECT_LT(std::abs(mean - 196.0), 3.0 * se);
}

TEST(Graph, SmallGraphsAreComplete) {
  for (int p = 2; p <= 8; ++p) EXPECT_EQ(gen_graph(p, 3).size(), static_cast<std::size_t>(p * (p - 1) / 2));
}

TEST(Graph, Deterministic) {
  EXPECT_EQ(gen_graph(40, 12), gen_graph(40, 12));
  EXPECT_NE(gen_graph(40, 12), gen_graph(40, 13));
}

TEST(Precision, EmptyGraph) {
  EXPECT_TRUE(gen_precision({}, 4, 1).isApprox(1.1 * Matrix::Identity(4, 4)));
}

TEST(Precision, SupportAndDefiniteness) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const int p = 30;
    const auto edges = gen_graph(p, seed);
    const Matrix theta = gen_precision(edges, p, seed);
    const std::set<Edge> edge_set(edges.begin(), edges.end());
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) {
        EXPECT_EQ(theta(i, j) != 0.0, edge_set.count({i, j}) == 1);
        EXPECT_EQ(theta(i, j), theta(j, i));
        if (theta(i, j) != 0.0) {
          EXPECT_GE(std::abs(theta(i, j)), 0.2);
          EXPECT_LE(std::abs(theta(i, j)), 0.6);
        }
      }
    EXPECT_EQ(Eigen::LLT<Matrix>(theta).info(), Eigen::Success);
  }
}

TEST(Features, IdentityPrecisionMoments) {
  const Eigen::Index n = 50000;
  const Matrix x = sample_features(Matrix::Identity(4, 4), n, 2);
  const Vector mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(n);
  EXPECT_LE((cov - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 0.05);
  for (int j = 0; j < 4; ++j) EXPECT_LT(std::abs(mean(j)), 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Features, CorrelationsMatchCovariance) {
  const int p = 12;
  const auto edges = gen_graph(p, 5);
  const Matrix theta = gen_precision(edges, p, 5);
  const Matrix sigma = theta.inverse();
  const Eigen::Index n = 100000;
  const Matrix x = sample_features(theta, n, 6);
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(n);
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      const double emp = cov(i, j) * cov(i, j) / (cov(i, i) * cov(j, j));
      const double exact = sigma(i, j) * sigma(i, j) / (sigma(i, i) * sigma(j, j));
      EXPECT_NEAR(emp, exact, 0.02);
    }
}

TEST(Features, DeterministicAndRejectsIndefinite) {
  const Matrix theta = gen_precision(gen_graph(10, 1), 10, 1);
  EXPECT_EQ(sample_features(theta, 20, 4), sample_features(theta, 20, 4));
  Matrix bad = Matrix::Identity(3, 3);
  bad(0, 0) = -1.0;
  EXPECT_THROW(sample_features(bad, 5, 0), RuntimeFailure);
}

TEST(Interactions, Triangle) {
  EXPECT_EQ(enumerate_interactions({{0, 1}, {0, 2}, {1, 2}}, 3),
            (std::vector<VarSet>{{0, 1}, {0, 2}, {1, 2}, {0, 1, 2}}));
}

TEST(Interactions, Path) {
  EXPECT_EQ(enumerate_interactions({{0, 1}, {1, 2}}, 3), (std::vector<VarSet>{{0, 1}, {1, 2}}));
}

TEST(Interactions, MatchesExhaustiveSearch) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const int p = 4 + static_cast<int>(seed % 12);
    const auto edges = gen_graph(p, seed, 0.5 * p);
    EXPECT_EQ(enumerate_interactions(edges, p), oracle::brute_force_cliques(p, edges)) << "seed " << seed;
  }
}

TEST(Interactions, CapIsEnforced) {
  std::vector<Edge> complete;
  for (int i = 0; i < 12; ++i)
    for (int j = i + 1; j < 12; ++j) complete.push_back({i, j});
  EXPECT_THROW(enumerate_interactions(complete, 12, 1000), RuntimeFailure);
  EXPECT_EQ(enumerate_interactions(complete, 12, 5000).size(), 4096u - 12u - 1u);
}

TEST(Nonlinearity, Family) {
  EXPECT_DOUBLE_EQ(apply_nonlinearity(Nonlinearity::sigmoid2, 0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(apply_nonlinearity(Nonlinearity::soft_square, -2.0, 1.0), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(apply_nonlinearity(Nonlinearity::soft_cube, 1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(apply_nonlinearity(Nonlinearity::relu, -1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(apply_nonlinearity(Nonlinearity::bump, 2.0, 2.0), std::exp(-0.5));
  for (int i = 0; i < kNonlinearityCount; ++i) {
    const auto f = static_cast<Nonlinearity>(i);
    EXPECT_EQ(nonlinearity_from_string(to_string(f)), f);
  }
  EXPECT_THROW(nonlinearity_from_string("softplus"), ConfigError);
}

TEST(Targets, NoInteractionsIsPureNoise) {
  const Matrix x = sample_features(Matrix::Identity(3, 3), 40000, 1);
  const auto out = gen_targets(x, {}, 3);
  const double var = (out.target.array() - out.target.mean()).square().mean();
  EXPECT_NEAR(var, 0.25, 0.01);
}

TEST(Targets, NoiselessSingleRelu) {
  const Matrix x = sample_features(Matrix::Identity(3, 3), 100, 1);
  SynthConstants c;
  c.noise_std = 0.0;
  Interaction it{{0, 1}, 1.0, Nonlinearity::relu, 1.0};
  const Vector y = interaction_signal(x, {it});
  for (Eigen::Index t = 0; t < 100; ++t) EXPECT_EQ(y(t), std::max(x(t, 0) + x(t, 1), 0.0));
  const auto gen = gen_targets(x, {{0, 1}, {1, 2}}, 5, c);
  EXPECT_LE((gen.target - interaction_signal(x, gen.interactions)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Targets, DrawRanges) {
  std::vector<VarSet> sets(400, VarSet{0, 1});
  const auto its = draw_interactions(sets, 7);
  std::set<Nonlinearity> seen;
  for (const auto& it : its) {
    EXPECT_GE(it.beta, -1.0);
    EXPECT_LE(it.beta, 1.0);
    seen.insert(it.f);
    if (it.f == Nonlinearity::bump) {
      EXPECT_GE(it.width, 0.5);
      EXPECT_LE(it.width, 2.0);
    }
  }
  EXPECT_EQ(seen.size(), 8u);
}

TEST(Targets, Deterministic) {
  const Matrix x = sample_features(Matrix::Identity(3, 3), 30, 1);
  const auto a = gen_targets(x, {{0, 1}, {0, 2}}, 9), b = gen_targets(x, {{0, 1}, {0, 2}}, 9);
  EXPECT_EQ(a.target, b.target);
  EXPECT_EQ(a.interactions[1].beta, b.interactions[1].beta);
  EXPECT_THROW(gen_targets(x, {{0}}, 9), ConfigError);
}

TEST(Task, SmokeOverSeeds) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto task = gen_task(50, 2000, seed);
    ASSERT_FALSE(task.interactions.empty());
    EXPECT_EQ(task.features.rows(), 2000);
    EXPECT_EQ(task.features.cols(), 50);
    const std::set<Edge> edges(task.graph.begin(), task.graph.end());
    for (const auto& it : task.interactions)
      for (std::size_t a = 0; a < it.vars.size(); ++a)
        for (std::size_t b = a + 1; b < it.vars.size(); ++b) EXPECT_TRUE(edges.count({it.vars[a], it.vars[b]}));
    const auto h = oracle_hierarchy(task.interaction_sets(), 50);
    EXPECT_TRUE(check_hierarchy(h).ok());
    // Closure was already present: the hierarchy's order >= 2 units are exactly the interactions.
    std::size_t units = 0;
    for (int k = 2; k <= h.k_max(); ++k) units += h.units(k);
    EXPECT_EQ(units, task.interactions.size());
  }
}

TEST(Task, NoiselessRecomputation) {
  SynthConstants c;
  c.noise_std = 0.0;
  const auto task = gen_task(20, 500, 4, c);
  EXPECT_LE((task.target - interaction_signal(task.features, task.interactions)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Task, RetriesOnEdgelessGraph) {
  SynthConstants c;
  c.edge_degree = 0.3;  // edge probability 0.1 on three vertices
  const auto task = gen_task(3, 10, 0, c);
  EXPECT_FALSE(task.interactions.empty());
  EXPECT_EQ(task.effective_seed, task.seed + static_cast<std::uint64_t>(task.retries) * 1000003ULL);
}

TEST(Task, BundleRoundTrip) {
  const auto task = gen_task(15, 60, 2);
  const auto dir = std::filesystem::temp_directory_path() / "homnet-tests" / "bundle";
  save_task(task, dir);
  const auto back = load_task(dir);
  EXPECT_EQ(back.graph, task.graph);
  EXPECT_EQ(back.precision, task.precision);
  EXPECT_EQ(back.features, task.features);
  EXPECT_EQ(back.target, task.target);
  ASSERT_EQ(back.interactions.size(), task.interactions.size());
  for (std::size_t i = 0; i < task.interactions.size(); ++i) {
    EXPECT_EQ(back.interactions[i].vars, task.interactions[i].vars);
    EXPECT_EQ(back.interactions[i].beta, task.interactions[i].beta);
    EXPECT_EQ(back.interactions[i].f, task.interactions[i].f);
  }
}
