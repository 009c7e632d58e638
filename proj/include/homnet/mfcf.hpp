#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "homnet/depgraph.hpp"

namespace homnet {

using VarSet = std::vector<int>;  // sorted ascending, no duplicates

struct MfcfConfig {
  int max_clique_size = 4;  // K
  int min_clique_size = 1;
  double gain_threshold = 0.0;
  /// Break exact gain ties with a seeded vertex priority instead of vertex id.
  bool randomize_ties = false;

  void validate() const;
};

/// Gain recorded for the root and for singleton attachments.
inline constexpr double kNoPositiveGain = -std::numeric_limits<double>::infinity();

struct InsertionRecord {
  int vertex = -1;
  VarSet separator;
  int clique = -1;  // index into CliqueForest::cliques after the insertion
  double gain = kNoPositiveGain;
};

/**
 * Maximally Filtered Clique Forest.
 *
 * `separators[i]` and `attachment[i]` describe how clique `i` joined the
 * forest: through `separators[i]`, a subset of clique `attachment[i]`.
 * Tree roots have attachment -1 and an empty separator.
 */
struct CliqueForest {
  int p = 0;
  std::vector<VarSet> cliques;
  std::vector<VarSet> separators;
  std::vector<int> attachment;
  std::vector<InsertionRecord> insertion_log;
};

/// Greedy clique-forest construction with gain
/// gain(v, S) = sum over u in S of M[v, u].
CliqueForest build_mfcf(const DependencyMatrix& m, const MfcfConfig& cfg, std::uint64_t seed = 0);

struct ValidationReport {
  bool spanning = false;
  bool size_bound = false;
  bool separators_valid = false;
  bool running_intersection = false;
  bool chordal = false;
  std::vector<std::string> messages;

  bool ok() const { return spanning && size_bound && separators_valid && running_intersection && chordal; }
};

ValidationReport validate_forest(const CliqueForest& forest, int p, int max_clique_size);

using Edge = std::pair<int, int>;  // first < second

/// Union of within-clique pairs, sorted and deduplicated.
std::vector<Edge> induced_edges(const CliqueForest& forest);
std::vector<Edge> induced_edges(const std::vector<VarSet>& cliques);

/// Perfect elimination ordering test via lexicographic BFS.
bool is_chordal(int p, const std::vector<Edge>& edges);

nlohmann::json to_json(const CliqueForest& forest);
CliqueForest forest_from_json(const nlohmann::json& j);

}  // namespace homnet
