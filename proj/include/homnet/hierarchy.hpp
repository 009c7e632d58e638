#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "homnet/mfcf.hpp"

namespace homnet {

/// Layer-by-layer connectivity of a sparse interaction network.
///
/// `widths[k-1]` is the number of order-k units. `parents[k-1][u]` lists the
/// order-(k-1) units feeding order-k unit u, sorted ascending (empty for k=1).
struct Wiring {
  int p = 0;
  std::vector<int> widths;
  std::vector<std::vector<std::vector<int>>> parents;

  int k_max() const { return static_cast<int>(widths.size()); }
};

/**
 * Downward-closed family of variable subsets, grouped by size.
 *
 * `orders[k-1]` holds the order-k units in lexicographic order of their
 * sorted member ids. `edges[k-1]` (k >= 2) lists (child, parent) index pairs
 * with parent a (k-1)-subset of child; `edges[0]` is empty.
 */
struct InteractionHierarchy {
  int p = 0;
  std::vector<std::vector<VarSet>> orders;
  std::vector<std::vector<std::pair<int, int>>> edges;

  int k_max() const { return static_cast<int>(orders.size()); }
  std::size_t units(int k) const {
    return k >= 1 && k <= k_max() ? orders[static_cast<std::size_t>(k - 1)].size() : 0;
  }

  /// Index of `unit` in its order, or -1.
  int find(const VarSet& unit) const;

  Wiring wiring() const;

  bool operator==(const InteractionHierarchy&) const = default;
};

struct HierarchyCheck {
  bool downward_closed = true;
  bool unique = true;
  bool edges_complete = true;
  bool singletons_complete = true;
  std::vector<std::string> messages;

  bool ok() const { return downward_closed && unique && edges_complete && singletons_complete; }
};

HierarchyCheck check_hierarchy(const InteractionHierarchy& h);

/// All distinct subsets of the given cliques, plus every singleton in [0, p).
InteractionHierarchy from_cliques(const std::vector<VarSet>& cliques, int p);

/// Per-order set union; edges recomputed.
InteractionHierarchy hierarchy_union(const InteractionHierarchy& a, const InteractionHierarchy& b);

/// Hierarchy over ground-truth interaction sets, closed under taking subsets.
InteractionHierarchy oracle_hierarchy(const std::vector<VarSet>& interaction_sets, int p);

/// Same per-order widths and in-degrees as `h`, but every unit's parents are
/// drawn uniformly without replacement from the whole previous layer.
Wiring randomize(const InteractionHierarchy& h, std::uint64_t seed);

/// Trainable scalars of the sparse network built over this wiring: masked
/// weights, biases, per-order readouts and the combiner.
std::size_t param_count(const Wiring& w);
inline std::size_t param_count(const InteractionHierarchy& h) { return param_count(h.wiring()); }

nlohmann::json to_json(const InteractionHierarchy& h);
InteractionHierarchy hierarchy_from_json(const nlohmann::json& j);

}  // namespace homnet
