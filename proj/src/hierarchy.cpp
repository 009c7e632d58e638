#include "homnet/hierarchy.hpp"

#include <algorithm>
#include <set>

#include "homnet/error.hpp"
#include "homnet/rng.hpp"

namespace homnet {

namespace {

constexpr std::size_t kMaxSetSize = 24;

using OrderSets = std::vector<std::set<VarSet>>;

void add_with_subsets(const VarSet& raw, OrderSets& acc) {
  VarSet s = raw;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  if (s.empty()) return;
  if (s.size() > kMaxSetSize)
    throw ConfigError("interaction set of size " + std::to_string(s.size()) + " is too large to expand");
  if (acc.size() < s.size()) acc.resize(s.size());
  const std::uint32_t full = (1u << s.size()) - 1;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    VarSet sub;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (mask & (1u << i)) sub.push_back(s[i]);
    acc[sub.size() - 1].insert(std::move(sub));
  }
}

InteractionHierarchy assemble(int p, OrderSets acc) {
  if (acc.empty()) acc.resize(1);
  for (int v = 0; v < p; ++v) acc[0].insert(VarSet{v});
  InteractionHierarchy h;
  h.p = p;
  for (auto& level : acc) h.orders.emplace_back(level.begin(), level.end());
  while (!h.orders.empty() && h.orders.back().empty()) h.orders.pop_back();

  h.edges.assign(h.orders.size(), {});
  for (std::size_t k = 1; k < h.orders.size(); ++k) {
    const auto& lower = h.orders[k - 1];
    auto& out = h.edges[k];
    for (std::size_t u = 0; u < h.orders[k].size(); ++u) {
      const VarSet& unit = h.orders[k][u];
      std::vector<int> parents;
      for (std::size_t drop = 0; drop < unit.size(); ++drop) {
        VarSet sub;
        for (std::size_t i = 0; i < unit.size(); ++i)
          if (i != drop) sub.push_back(unit[i]);
        const auto it = std::lower_bound(lower.begin(), lower.end(), sub);
        if (it == lower.end() || *it != sub) throw RuntimeFailure("hierarchy is not downward closed");
        parents.push_back(static_cast<int>(it - lower.begin()));
      }
      std::sort(parents.begin(), parents.end());
      for (int par : parents) out.emplace_back(static_cast<int>(u), par);
    }
  }
  return h;
}

OrderSets to_sets(const InteractionHierarchy& h) {
  OrderSets acc(h.orders.size());
  for (std::size_t k = 0; k < h.orders.size(); ++k) acc[k].insert(h.orders[k].begin(), h.orders[k].end());
  return acc;
}

}  // namespace

int InteractionHierarchy::find(const VarSet& unit) const {
  const auto k = unit.size();
  if (k == 0 || k > orders.size()) return -1;
  const auto& level = orders[k - 1];
  const auto it = std::lower_bound(level.begin(), level.end(), unit);
  return it != level.end() && *it == unit ? static_cast<int>(it - level.begin()) : -1;
}

Wiring InteractionHierarchy::wiring() const {
  Wiring w;
  w.p = p;
  w.parents.resize(orders.size());
  for (std::size_t k = 0; k < orders.size(); ++k) {
    w.widths.push_back(static_cast<int>(orders[k].size()));
    w.parents[k].resize(orders[k].size());
  }
  for (std::size_t k = 1; k < edges.size(); ++k)
    for (auto [child, parent] : edges[k]) w.parents[k][static_cast<std::size_t>(child)].push_back(parent);
  return w;
}

HierarchyCheck check_hierarchy(const InteractionHierarchy& h) {
  HierarchyCheck c;
  for (std::size_t k = 0; k < h.orders.size(); ++k) {
    const auto& level = h.orders[k];
    for (std::size_t u = 0; u < level.size(); ++u) {
      if (level[u].size() != k + 1) {
        c.unique = false;
        c.messages.push_back("unit of wrong size at order " + std::to_string(k + 1));
      }
      if (u > 0 && !(level[u - 1] < level[u])) {
        c.unique = false;
        c.messages.push_back("order " + std::to_string(k + 1) + " is not strictly increasing");
      }
    }
  }
  for (std::size_t k = 1; k < h.orders.size(); ++k) {
    std::vector<int> indeg(h.orders[k].size(), 0);
    if (k < h.edges.size())
      for (auto [child, parent] : h.edges[k]) {
        ++indeg[static_cast<std::size_t>(child)];
        const auto& cu = h.orders[k][static_cast<std::size_t>(child)];
        const auto& pu = h.orders[k - 1][static_cast<std::size_t>(parent)];
        if (!std::includes(cu.begin(), cu.end(), pu.begin(), pu.end())) c.edges_complete = false;
      }
    for (std::size_t u = 0; u < h.orders[k].size(); ++u) {
      if (indeg[u] != static_cast<int>(k + 1)) c.edges_complete = false;
      const auto& unit = h.orders[k][u];
      for (std::size_t drop = 0; drop < unit.size(); ++drop) {
        VarSet sub;
        for (std::size_t i = 0; i < unit.size(); ++i)
          if (i != drop) sub.push_back(unit[i]);
        if (h.find(sub) < 0) c.downward_closed = false;
      }
    }
  }
  if (!c.edges_complete) c.messages.push_back("some unit does not have exactly k inclusion edges");
  if (!c.downward_closed) c.messages.push_back("hierarchy is not downward closed");
  for (int v = 0; v < h.p; ++v)
    if (h.find(VarSet{v}) < 0) c.singletons_complete = false;
  if (!c.singletons_complete) c.messages.push_back("not every variable has a singleton unit");
  return c;
}

InteractionHierarchy from_cliques(const std::vector<VarSet>& cliques, int p) {
  OrderSets acc;
  for (const auto& c : cliques) {
    for (int v : c)
      if (v < 0 || v >= p) throw ConfigError("clique member " + std::to_string(v) + " outside [0, p)");
    add_with_subsets(c, acc);
  }
  return assemble(p, std::move(acc));
}

InteractionHierarchy hierarchy_union(const InteractionHierarchy& a, const InteractionHierarchy& b) {
  if (a.p != b.p) throw ConfigError("hierarchy union: dimension mismatch (" + std::to_string(a.p) + " vs " +
                                    std::to_string(b.p) + ")");
  OrderSets acc = to_sets(a);
  const OrderSets other = to_sets(b);
  if (acc.size() < other.size()) acc.resize(other.size());
  for (std::size_t k = 0; k < other.size(); ++k) acc[k].insert(other[k].begin(), other[k].end());
  return assemble(a.p, std::move(acc));
}

InteractionHierarchy oracle_hierarchy(const std::vector<VarSet>& interaction_sets, int p) {
  // Closure is applied even though generated interaction lists are already closed.
  return from_cliques(interaction_sets, p);
}

Wiring randomize(const InteractionHierarchy& h, std::uint64_t seed) {
  Wiring w = h.wiring();
  Rng base = Rng(seed).split("rand-oracle");
  for (std::size_t k = 1; k < w.widths.size(); ++k) {
    Rng rng = base.split(static_cast<std::uint64_t>(k));
    const int lower = w.widths[k - 1];
    for (auto& parents : w.parents[k]) {
      const int degree = static_cast<int>(parents.size());
      parents = rng.sample_without_replacement(lower, degree);
      std::sort(parents.begin(), parents.end());
    }
  }
  return w;
}

std::size_t param_count(const Wiring& w) {
  std::size_t weights = 0, biases = 0, readouts = 0;
  for (std::size_t k = 1; k < w.widths.size(); ++k) {
    for (const auto& parents : w.parents[k]) weights += parents.size();
    biases += static_cast<std::size_t>(w.widths[k]);
    readouts += static_cast<std::size_t>(w.widths[k]) + 1;
  }
  const std::size_t combiner = w.widths.size() >= 2 ? w.widths.size() : 0;  // (k_max - 1) + 1
  return weights + biases + readouts + combiner;
}

nlohmann::json to_json(const InteractionHierarchy& h) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& level : h.edges) {
    nlohmann::json e = nlohmann::json::array();
    for (auto [c, par] : level) e.push_back({c, par});
    edges.push_back(std::move(e));
  }
  return {{"p", h.p}, {"orders", h.orders}, {"edges", edges}};
}

InteractionHierarchy hierarchy_from_json(const nlohmann::json& j) {
  try {
    OrderSets acc;
    const int p = j.at("p").get<int>();
    for (const auto& level : j.at("orders"))
      for (const auto& unit : level) add_with_subsets(unit.get<VarSet>(), acc);
    InteractionHierarchy h = assemble(p, std::move(acc));
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed hierarchy JSON: ") + e.what());
  }
}

}  // namespace homnet
