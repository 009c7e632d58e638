#include "homnet/mfcf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "homnet/error.hpp"
#include "homnet/rng.hpp"

namespace homnet {

void MfcfConfig::validate() const {
  if (max_clique_size < 2) throw ConfigError("MFCF: max clique size must be at least 2");
  if (min_clique_size < 1) throw ConfigError("MFCF: min clique size must be at least 1");
  if (min_clique_size > max_clique_size) throw ConfigError("MFCF: min clique size exceeds max clique size");
  if (!std::isfinite(gain_threshold)) throw ConfigError("MFCF: gain threshold must be finite");
}

namespace {

struct Candidate {
  double gain = kNoPositiveGain;
  VarSet separator;
};

class ForestBuilder {
 public:
  ForestBuilder(const DependencyMatrix& m, const MfcfConfig& cfg, std::uint64_t seed)
      : m_(m), cfg_(cfg), p_(static_cast<int>(m.p())) {
    priority_.resize(static_cast<std::size_t>(p_));
    std::iota(priority_.begin(), priority_.end(), 0);
    if (cfg_.randomize_ties) {
      Rng rng = Rng(seed).split("mfcf-ties");
      std::vector<int> perm = priority_;
      rng.shuffle(perm);
      for (int i = 0; i < p_; ++i) priority_[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;
    }
    placed_.assign(static_cast<std::size_t>(p_), false);
    best_gain_.assign(static_cast<std::size_t>(p_), kNoPositiveGain);
    best_clique_.assign(static_cast<std::size_t>(p_), -1);
  }

  CliqueForest run() {
    forest_.p = p_;
    if (p_ == 0) return forest_;

    place_root();
    for (int step = 1; step < p_; ++step) insert_next();
    return std::move(forest_);
  }

 private:
  const DependencyMatrix& m_;
  const MfcfConfig& cfg_;
  int p_;
  std::vector<int> priority_;
  std::vector<bool> placed_;
  std::vector<double> best_gain_;
  std::vector<int> best_clique_;
  CliqueForest forest_;

  double dep(int a, int b) const { return m_(a, b); }

  /// Best separator for v inside clique q: the min(|q|, K-1) members with the
  /// largest dependence on v. With a positive threshold, members whose
  /// dependence does not exceed it are dropped.
  Candidate candidate(int v, int q) const {
    const VarSet& clique = forest_.cliques[static_cast<std::size_t>(q)];
    VarSet members = clique;
    std::stable_sort(members.begin(), members.end(), [&](int a, int b) { return dep(v, a) > dep(v, b); });
    const auto take = std::min<std::size_t>(members.size(), static_cast<std::size_t>(cfg_.max_clique_size - 1));
    members.resize(take);
    if (cfg_.gain_threshold > 0.0)
      std::erase_if(members, [&](int u) { return dep(v, u) <= cfg_.gain_threshold; });

    Candidate c;
    const auto min_sep = static_cast<std::size_t>(std::max(1, cfg_.min_clique_size - 1));
    if (members.size() < min_sep) return c;
    double gain = 0.0;
    for (int u : members) gain += dep(v, u);
    c.gain = gain;
    c.separator = std::move(members);
    std::sort(c.separator.begin(), c.separator.end());
    return c;
  }

  void place_root() {
    int root = 0;
    double best = -1.0;
    for (int v = 0; v < p_; ++v) {
      double sum = 0.0;
      for (int u = 0; u < p_; ++u)
        if (u != v) sum += dep(v, u);
      if (sum > best || (sum == best && priority_[static_cast<std::size_t>(v)] < priority_[static_cast<std::size_t>(root)])) {
        best = sum;
        root = v;
      }
    }
    add_clique({root}, {}, -1);
    forest_.insertion_log.push_back({root, {}, 0, kNoPositiveGain});
    placed_[static_cast<std::size_t>(root)] = true;
    refresh(0);
  }

  int add_clique(VarSet clique, VarSet separator, int parent) {
    forest_.cliques.push_back(std::move(clique));
    forest_.separators.push_back(std::move(separator));
    forest_.attachment.push_back(parent);
    return static_cast<int>(forest_.cliques.size()) - 1;
  }

  int pick_vertex() const {
    int pick = -1;
    for (int v = 0; v < p_; ++v) {
      const auto vi = static_cast<std::size_t>(v);
      if (placed_[vi]) continue;
      if (pick < 0) {
        pick = v;
        continue;
      }
      const auto pi = static_cast<std::size_t>(pick);
      if (best_gain_[vi] > best_gain_[pi] || (best_gain_[vi] == best_gain_[pi] && priority_[vi] < priority_[pi]))
        pick = v;
    }
    return pick;
  }

  void insert_next() {
    const int v = pick_vertex();
    const auto vi = static_cast<std::size_t>(v);
    const double gain = best_gain_[vi];
    int changed;
    if (best_clique_[vi] >= 0 && gain > cfg_.gain_threshold) {
      const int q = best_clique_[vi];
      Candidate c = candidate(v, q);
      VarSet grown = c.separator;
      grown.insert(std::lower_bound(grown.begin(), grown.end(), v), v);
      if (c.separator.size() == forest_.cliques[static_cast<std::size_t>(q)].size()) {
        // The separator is the whole of q, so q stops being maximal; it grows in place.
        forest_.cliques[static_cast<std::size_t>(q)] = std::move(grown);
        changed = q;
      } else {
        changed = add_clique(std::move(grown), c.separator, q);
      }
      forest_.insertion_log.push_back({v, std::move(c.separator), changed, gain});
    } else {
      changed = add_clique({v}, {}, -1);
      forest_.insertion_log.push_back({v, {}, changed, kNoPositiveGain});
    }
    placed_[vi] = true;
    refresh(changed);
  }

  /// Only clique q changed; every other candidate is unaffected.
  void refresh(int q) {
    for (int w = 0; w < p_; ++w) {
      const auto wi = static_cast<std::size_t>(w);
      if (placed_[wi]) continue;
      const double g = candidate(w, q).gain;
      if (best_clique_[wi] == q) {
        best_gain_[wi] = g;
      } else if (g > best_gain_[wi] || (g == best_gain_[wi] && g != kNoPositiveGain && q < best_clique_[wi])) {
        best_gain_[wi] = g;
        best_clique_[wi] = q;
      }
    }
  }
};

}  // namespace

CliqueForest build_mfcf(const DependencyMatrix& m, const MfcfConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (m.values.rows() != m.values.cols()) throw ConfigError("MFCF: dependency matrix must be square");
  return ForestBuilder(m, cfg, seed).run();
}

std::vector<Edge> induced_edges(const std::vector<VarSet>& cliques) {
  std::vector<Edge> edges;
  for (const auto& c : cliques)
    for (std::size_t a = 0; a < c.size(); ++a)
      for (std::size_t b = a + 1; b < c.size(); ++b) edges.emplace_back(std::min(c[a], c[b]), std::max(c[a], c[b]));
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<Edge> induced_edges(const CliqueForest& forest) { return induced_edges(forest.cliques); }

bool is_chordal(int p, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(p));
  for (auto [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  // Lexicographic BFS; labels hold the visit numbers (descending) of visited neighbours.
  std::vector<std::vector<int>> label(static_cast<std::size_t>(p));
  std::vector<bool> visited(static_cast<std::size_t>(p), false);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(p));
  for (int step = 0; step < p; ++step) {
    int pick = -1;
    for (int v = 0; v < p; ++v) {
      if (visited[static_cast<std::size_t>(v)]) continue;
      if (pick < 0 || label[static_cast<std::size_t>(v)] > label[static_cast<std::size_t>(pick)]) pick = v;
    }
    visited[static_cast<std::size_t>(pick)] = true;
    order.push_back(pick);
    for (int u : adj[static_cast<std::size_t>(pick)])
      if (!visited[static_cast<std::size_t>(u)]) label[static_cast<std::size_t>(u)].push_back(p - step);
  }

  // Reverse LexBFS order is a perfect elimination ordering iff the graph is chordal.
  std::vector<int> position(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) position[static_cast<std::size_t>(order[static_cast<std::size_t>(p - 1 - i)])] = i;
  for (int v = 0; v < p; ++v) {
    const auto pv = position[static_cast<std::size_t>(v)];
    int parent = -1;
    std::vector<int> later;
    for (int u : adj[static_cast<std::size_t>(v)]) {
      if (position[static_cast<std::size_t>(u)] > pv) {
        later.push_back(u);
        if (parent < 0 || position[static_cast<std::size_t>(u)] < position[static_cast<std::size_t>(parent)]) parent = u;
      }
    }
    for (int u : later) {
      if (u == parent) continue;
      const auto& pa = adj[static_cast<std::size_t>(parent)];
      if (!std::binary_search(pa.begin(), pa.end(), u)) return false;
    }
  }
  return true;
}

ValidationReport validate_forest(const CliqueForest& forest, int p, int max_clique_size) {
  ValidationReport r;
  const auto nc = forest.cliques.size();
  auto fail = [&](std::string msg) { r.messages.push_back(std::move(msg)); };

  if (forest.separators.size() != nc || forest.attachment.size() != nc) {
    fail("clique, separator and attachment lists differ in length");
    return r;
  }

  std::vector<bool> seen(static_cast<std::size_t>(std::max(p, 0)), false);
  bool in_range = true;
  for (const auto& c : forest.cliques)
    for (int v : c) {
      if (v < 0 || v >= p)
        in_range = false;
      else
        seen[static_cast<std::size_t>(v)] = true;
    }
  r.spanning = in_range && std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  if (!r.spanning) fail("some vertex is not covered by any clique, or an id is out of range");

  r.size_bound = std::all_of(forest.cliques.begin(), forest.cliques.end(), [&](const VarSet& c) {
    return !c.empty() && static_cast<int>(c.size()) <= max_clique_size;
  });
  if (!r.size_bound) fail("clique size outside [1, K]");

  auto subset = [](const VarSet& a, const VarSet& b) { return std::includes(b.begin(), b.end(), a.begin(), a.end()); };
  r.separators_valid = true;
  for (std::size_t i = 0; i < nc; ++i) {
    const int parent = forest.attachment[i];
    const auto& sep = forest.separators[i];
    if (!std::is_sorted(forest.cliques[i].begin(), forest.cliques[i].end()) || !std::is_sorted(sep.begin(), sep.end())) {
      r.separators_valid = false;
      fail("clique " + std::to_string(i) + ": members not sorted");
      continue;
    }
    if (parent < 0) {
      if (!sep.empty()) {
        r.separators_valid = false;
        fail("root clique " + std::to_string(i) + " has a nonempty separator");
      }
      continue;
    }
    if (parent >= static_cast<int>(i)) {
      r.separators_valid = false;
      fail("clique " + std::to_string(i) + " attaches to a later clique");
      continue;
    }
    if (!(subset(sep, forest.cliques[i]) && sep.size() < forest.cliques[i].size())) {
      r.separators_valid = false;
      fail("separator of clique " + std::to_string(i) + " is not a strict subset of it");
    }
    if (!subset(sep, forest.cliques[static_cast<std::size_t>(parent)])) {
      r.separators_valid = false;
      fail("separator of clique " + std::to_string(i) + " is not contained in its parent");
    }
  }

  // Running intersection: the cliques holding v induce a connected subtree.
  // In a forest, a vertex subset is connected iff #nodes - #internal edges == 1.
  r.running_intersection = true;
  {
    std::vector<std::vector<int>> holders(static_cast<std::size_t>(std::max(p, 0)));
    for (std::size_t i = 0; i < nc; ++i)
      for (int v : forest.cliques[i])
        if (v >= 0 && v < p) holders[static_cast<std::size_t>(v)].push_back(static_cast<int>(i));
    for (int v = 0; v < p; ++v) {
      const auto& h = holders[static_cast<std::size_t>(v)];
      if (h.empty()) continue;
      long internal = 0;
      for (int c : h) {
        const int parent = forest.attachment[static_cast<std::size_t>(c)];
        if (parent >= 0 && std::binary_search(h.begin(), h.end(), parent)) ++internal;
      }
      if (static_cast<long>(h.size()) - internal != 1) {
        r.running_intersection = false;
        fail("cliques containing vertex " + std::to_string(v) + " are not connected in the clique forest");
      }
    }
  }

  r.chordal = in_range && is_chordal(p, induced_edges(forest));
  if (!r.chordal) fail("induced graph is not chordal");
  return r;
}

nlohmann::json to_json(const CliqueForest& forest) {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& rec : forest.insertion_log) {
    nlohmann::json g = std::isfinite(rec.gain) ? nlohmann::json(rec.gain) : nlohmann::json(nullptr);
    log.push_back({{"v", rec.vertex}, {"sep", rec.separator}, {"clique", rec.clique}, {"gain", g}});
  }
  return {{"p", forest.p},
          {"cliques", forest.cliques},
          {"separators", forest.separators},
          {"attachment", forest.attachment},
          {"log", log}};
}

CliqueForest forest_from_json(const nlohmann::json& j) {
  CliqueForest f;
  try {
    f.p = j.value("p", 0);
    f.cliques = j.at("cliques").get<std::vector<VarSet>>();
    f.separators = j.at("separators").get<std::vector<VarSet>>();
    f.attachment = j.at("attachment").get<std::vector<int>>();
    if (j.contains("log")) {
      for (const auto& rec : j.at("log")) {
        InsertionRecord r;
        r.vertex = rec.at("v").get<int>();
        r.separator = rec.at("sep").get<VarSet>();
        r.clique = rec.value("clique", -1);
        r.gain = rec.at("gain").is_null() ? kNoPositiveGain : rec.at("gain").get<double>();
        f.insertion_log.push_back(std::move(r));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed clique forest JSON: ") + e.what());
  }
  return f;
}

}  // namespace homnet
