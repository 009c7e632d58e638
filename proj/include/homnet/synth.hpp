#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homnet/data.hpp"
#include "homnet/mfcf.hpp"

namespace homnet {

/// Nonlinearities applied to the sum of an interaction's variables.
enum class Nonlinearity { sin, cos, tanh, sigmoid2, soft_square, soft_cube, relu, bump };

inline constexpr int kNonlinearityCount = 8;

std::string to_string(Nonlinearity f);
Nonlinearity nonlinearity_from_string(const std::string& name);

/// f(z); `width` is only used by the Gaussian bump.
double apply_nonlinearity(Nonlinearity f, double z, double width);

struct Interaction {
  VarSet vars;
  double beta = 0.0;
  Nonlinearity f = Nonlinearity::sin;
  double width = 1.0;
};

/// Generator constants. Magnitudes and widths are not pinned down by the
/// generating process itself and live here so manifests record them.
struct SynthConstants {
  double edge_degree = 8.0;  // edge probability is min(edge_degree / p, 1)
  double offdiag_min = 0.2;
  double offdiag_max = 0.6;
  double diag_margin = 0.1;
  double width_min = 0.5;
  double width_max = 2.0;
  double noise_std = 0.5;
  std::size_t interaction_cap = 200000;
  int max_retries = 32;
};

struct SyntheticTask {
  int p = 0;
  std::uint64_t seed = 0;            // requested seed
  std::uint64_t effective_seed = 0;  // seed actually used after retries
  int retries = 0;
  SynthConstants constants;
  std::vector<Edge> graph;
  Matrix precision;
  Matrix covariance;
  std::vector<Interaction> interactions;
  Matrix features;
  Vector target;

  Dataset dataset() const;
  std::vector<VarSet> interaction_sets() const;
};

std::vector<Edge> gen_graph(int p, std::uint64_t seed, double edge_degree = 8.0);

/// Off-diagonal entries with random sign and magnitude on the graph's edges,
/// diagonal 1 + row abs sum + margin (strictly diagonally dominant).
Matrix gen_precision(const std::vector<Edge>& edges, int p, std::uint64_t seed, const SynthConstants& c = {});

/// n draws from N(0, precision^-1) using the Cholesky factor of the precision.
/// Throws RuntimeFailure if the precision is not positive definite.
Matrix sample_features(const Matrix& precision, Eigen::Index n, std::uint64_t seed);

/// Maximal cliques via Bron-Kerbosch with pivoting, each sorted; list sorted.
std::vector<VarSet> maximal_cliques(const std::vector<Edge>& edges, int p);

/// Every clique of size >= 2, sorted by (size, members). Throws
/// RuntimeFailure once the count would exceed `cap`.
std::vector<VarSet> enumerate_interactions(const std::vector<Edge>& edges, int p, std::size_t cap = 200000);

/// Draws coefficient, nonlinearity and bump width for each set.
std::vector<Interaction> draw_interactions(const std::vector<VarSet>& sets, std::uint64_t seed, const SynthConstants& c = {});

/// Noise-free target: sum over interactions of beta * f(sum of members).
Vector interaction_signal(const Matrix& features, const std::vector<Interaction>& interactions);

struct GeneratedTargets {
  Vector target;
  std::vector<Interaction> interactions;
};

/// Annotates the sets and forms y = signal + N(0, noise_std^2). noise_std 0 gives the noiseless target.
GeneratedTargets gen_targets(const Matrix& features, const std::vector<VarSet>& sets, std::uint64_t seed,
                             const SynthConstants& c = {});

SyntheticTask gen_task(int p, Eigen::Index n, std::uint64_t seed, const SynthConstants& c = {});

/// Fresh rows from the same task (same precision and interactions, new noise).
Dataset sample_task_rows(const SyntheticTask& task, Eigen::Index n, std::uint64_t seed);

nlohmann::json task_manifest(const SyntheticTask& task);

/// Writes data.csv (features + y) and manifest.json into `dir`.
void save_task(const SyntheticTask& task, const std::filesystem::path& dir);
SyntheticTask load_task(const std::filesystem::path& dir);

}  // namespace homnet
