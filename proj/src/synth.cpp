#include "homnet/synth.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>

#include "homnet/error.hpp"
#include "homnet/rng.hpp"

namespace homnet {

namespace {

constexpr std::array<const char*, kNonlinearityCount> kNames = {"sin",         "cos",       "tanh", "sigmoid2",
                                                                "soft_square", "soft_cube", "relu", "bump"};

}  // namespace

std::string to_string(Nonlinearity f) { return kNames[static_cast<std::size_t>(f)]; }

Nonlinearity nonlinearity_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (name == kNames[i]) return static_cast<Nonlinearity>(i);
  throw ConfigError("unknown nonlinearity '" + name + "'");
}

double apply_nonlinearity(Nonlinearity f, double z, double width) {
  switch (f) {
    case Nonlinearity::sin: return std::sin(z);
    case Nonlinearity::cos: return std::cos(z);
    case Nonlinearity::tanh: return std::tanh(z);
    case Nonlinearity::sigmoid2: return 2.0 / (1.0 + std::exp(-z)) - 1.0;
    case Nonlinearity::soft_square: return z * z / (1.0 + std::abs(z));
    case Nonlinearity::soft_cube: return z * z * z / (1.0 + z * z);
    case Nonlinearity::relu: return std::max(z, 0.0);
    case Nonlinearity::bump: {
      const double u = z / width;
      return std::exp(-0.5 * u * u);
    }
  }
  return 0.0;
}

Dataset SyntheticTask::dataset() const {
  Dataset d;
  d.features = features;
  d.target = target;
  for (int i = 0; i < p; ++i) d.feature_names.push_back("x" + std::to_string(i));
  return d;
}

std::vector<VarSet> SyntheticTask::interaction_sets() const {
  std::vector<VarSet> out;
  out.reserve(interactions.size());
  for (const auto& it : interactions) out.push_back(it.vars);
  return out;
}

std::vector<Edge> gen_graph(int p, std::uint64_t seed, double edge_degree) {
  if (p < 2) throw ConfigError("gen_graph: p must be at least 2");
  const double prob = std::min(edge_degree / static_cast<double>(p), 1.0);
  Rng rng = Rng(seed).split("graph");
  std::vector<Edge> edges;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (rng.uniform() < prob) edges.emplace_back(i, j);
  return edges;
}

Matrix gen_precision(const std::vector<Edge>& edges, int p, std::uint64_t seed, const SynthConstants& c) {
  Rng rng = Rng(seed).split("precision");
  Matrix theta = Matrix::Zero(p, p);
  for (auto [i, j] : edges) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double mag = rng.uniform(c.offdiag_min, c.offdiag_max);
    theta(i, j) = theta(j, i) = sign * mag;
  }
  for (int i = 0; i < p; ++i) theta(i, i) = 1.0 + theta.row(i).cwiseAbs().sum() + c.diag_margin;
  return theta;
}

Matrix sample_features(const Matrix& precision, Eigen::Index n, std::uint64_t seed) {
  const auto p = precision.rows();
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw RuntimeFailure("sample_features: precision matrix is not positive definite");
  Rng rng = Rng(seed).split("features");
  Matrix z(p, n);
  for (Eigen::Index s = 0; s < n; ++s)
    for (Eigen::Index i = 0; i < p; ++i) z(i, s) = rng.normal();
  // precision = L L^T, so x = L^-T z has covariance precision^-1.
  const Matrix x = llt.matrixU().solve(z);
  return x.transpose();
}

namespace {

class CliqueFinder {
 public:
  CliqueFinder(const std::vector<Edge>& edges, int p) : adj_(static_cast<std::size_t>(p)) {
    for (auto [a, b] : edges) {
      if (a < 0 || b < 0 || a >= p || b >= p || a == b) throw ConfigError("edge out of range");
      adj_[static_cast<std::size_t>(a)].push_back(b);
      adj_[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& a : adj_) {
      std::sort(a.begin(), a.end());
      a.erase(std::unique(a.begin(), a.end()), a.end());
    }
  }

  std::vector<VarSet> run() {
    VarSet r, p, x;
    for (int v = 0; v < static_cast<int>(adj_.size()); ++v) p.push_back(v);
    expand(r, p, x);
    std::sort(out_.begin(), out_.end());
    return std::move(out_);
  }

 private:
  std::vector<std::vector<int>> adj_;
  std::vector<VarSet> out_;

  VarSet meet(const VarSet& s, int v) const {
    VarSet o;
    const auto& n = adj_[static_cast<std::size_t>(v)];
    std::set_intersection(s.begin(), s.end(), n.begin(), n.end(), std::back_inserter(o));
    return o;
  }

  void expand(VarSet& r, VarSet p, VarSet x) {
    if (p.empty() && x.empty()) {
      VarSet c = r;
      std::sort(c.begin(), c.end());
      out_.push_back(std::move(c));
      return;
    }
    // Pivot on the vertex of P u X with the most neighbours in P.
    int pivot = -1;
    std::size_t best = 0;
    for (const VarSet* s : {&p, &x})
      for (int u : *s) {
        const auto cnt = meet(p, u).size();
        if (pivot < 0 || cnt > best) {
          pivot = u;
          best = cnt;
        }
      }
    const auto& pn = adj_[static_cast<std::size_t>(pivot)];
    VarSet candidates;
    std::set_difference(p.begin(), p.end(), pn.begin(), pn.end(), std::back_inserter(candidates));
    for (int v : candidates) {
      r.push_back(v);
      expand(r, meet(p, v), meet(x, v));
      r.pop_back();
      p.erase(std::lower_bound(p.begin(), p.end(), v));
      x.insert(std::lower_bound(x.begin(), x.end(), v), v);
    }
  }
};

bool by_size_then_members(const VarSet& a, const VarSet& b) {
  return a.size() != b.size() ? a.size() < b.size() : a < b;
}

}  // namespace

std::vector<VarSet> maximal_cliques(const std::vector<Edge>& edges, int p) { return CliqueFinder(edges, p).run(); }

std::vector<VarSet> enumerate_interactions(const std::vector<Edge>& edges, int p, std::size_t cap) {
  std::set<VarSet> found;
  for (const auto& clique : maximal_cliques(edges, p)) {
    if (clique.size() < 2) continue;
    if (clique.size() > 30)
      throw RuntimeFailure("enumerate_interactions: clique of size " + std::to_string(clique.size()) + " exceeds the cap");
    const std::uint64_t full = (std::uint64_t{1} << clique.size()) - 1;
    for (std::uint64_t mask = 1; mask <= full; ++mask) {
      if (std::popcount(mask) < 2) continue;
      VarSet sub;
      for (std::size_t i = 0; i < clique.size(); ++i)
        if (mask & (std::uint64_t{1} << i)) sub.push_back(clique[i]);
      found.insert(std::move(sub));
      if (found.size() > cap)
        throw RuntimeFailure("enumerate_interactions: more than " + std::to_string(cap) +
                             " interaction sets; raise the cap or use a sparser graph");
    }
  }
  std::vector<VarSet> out(found.begin(), found.end());
  std::sort(out.begin(), out.end(), by_size_then_members);
  return out;
}

std::vector<Interaction> draw_interactions(const std::vector<VarSet>& sets, std::uint64_t seed, const SynthConstants& c) {
  Rng rng = Rng(seed).split("interactions");
  std::vector<Interaction> out;
  out.reserve(sets.size());
  for (const auto& s : sets) {
    Interaction it;
    it.vars = s;
    it.beta = rng.uniform(-1.0, 1.0);
    it.f = static_cast<Nonlinearity>(rng.below(kNonlinearityCount));
    // Drawn for every interaction so the stream does not depend on f.
    const double width = rng.uniform(c.width_min, c.width_max);
    it.width = it.f == Nonlinearity::bump ? width : 1.0;
    out.push_back(std::move(it));
  }
  return out;
}

Vector interaction_signal(const Matrix& features, const std::vector<Interaction>& interactions) {
  Vector y = Vector::Zero(features.rows());
  for (const auto& it : interactions) {
    for (Eigen::Index t = 0; t < features.rows(); ++t) {
      double z = 0.0;
      for (int v : it.vars) z += features(t, v);
      y(t) += it.beta * apply_nonlinearity(it.f, z, it.width);
    }
  }
  return y;
}

namespace {

Vector noise(Eigen::Index n, double std, Rng rng) {
  Vector e(n);
  for (Eigen::Index t = 0; t < n; ++t) e(t) = std * rng.normal();
  return e;
}

}  // namespace

GeneratedTargets gen_targets(const Matrix& features, const std::vector<VarSet>& sets, std::uint64_t seed,
                             const SynthConstants& c) {
  for (const auto& s : sets)
    if (s.size() < 2) throw ConfigError("gen_targets: interaction sets must have at least two members");
  GeneratedTargets out;
  out.interactions = draw_interactions(sets, seed, c);
  out.target = interaction_signal(features, out.interactions);
  if (c.noise_std > 0.0) out.target += noise(features.rows(), c.noise_std, Rng(seed).split("noise"));
  return out;
}

SyntheticTask gen_task(int p, Eigen::Index n, std::uint64_t seed, const SynthConstants& c) {
  if (p < 2 || n < 2) throw ConfigError("gen_task: need p >= 2 and n >= 2");
  SyntheticTask task;
  task.p = p;
  task.seed = seed;
  task.constants = c;
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt) * 1000003ULL;
    auto graph = gen_graph(p, s, c.edge_degree);
    auto sets = enumerate_interactions(graph, p, c.interaction_cap);
    if (sets.empty()) {
      if (attempt >= c.max_retries)
        throw RuntimeFailure("gen_task: no interactions after " + std::to_string(attempt + 1) + " attempts");
      continue;
    }
    task.effective_seed = s;
    task.retries = attempt;
    task.graph = std::move(graph);
    task.precision = gen_precision(task.graph, p, s, c);
    task.features = sample_features(task.precision, n, s);
    auto targets = gen_targets(task.features, sets, s, c);
    task.target = std::move(targets.target);
    task.interactions = std::move(targets.interactions);
    break;
  }
  task.covariance = task.precision.llt().solve(Matrix::Identity(p, p));
  return task;
}

Dataset sample_task_rows(const SyntheticTask& task, Eigen::Index n, std::uint64_t seed) {
  Dataset d;
  d.features = sample_features(task.precision, n, seed);
  d.target = interaction_signal(d.features, task.interactions);
  if (task.constants.noise_std > 0.0) d.target += noise(n, task.constants.noise_std, Rng(seed).split("noise"));
  for (int i = 0; i < task.p; ++i) d.feature_names.push_back("x" + std::to_string(i));
  return d;
}

nlohmann::json task_manifest(const SyntheticTask& task) {
  const auto& c = task.constants;
  nlohmann::json interactions = nlohmann::json::array();
  for (const auto& it : task.interactions)
    interactions.push_back({{"vars", it.vars}, {"beta", it.beta}, {"f", to_string(it.f)}, {"width", it.width}});
  nlohmann::json edges = nlohmann::json::array();
  for (auto [a, b] : task.graph) edges.push_back({a, b});
  nlohmann::json precision = nlohmann::json::array();
  for (Eigen::Index i = 0; i < task.precision.rows(); ++i) {
    std::vector<double> row(task.precision.cols());
    for (Eigen::Index j = 0; j < task.precision.cols(); ++j) row[static_cast<std::size_t>(j)] = task.precision(i, j);
    precision.push_back(row);
  }
  return {{"p", task.p},
          {"n", task.features.rows()},
          {"seed", task.seed},
          {"effective_seed", task.effective_seed},
          {"retries", task.retries},
          {"constants",
           {{"edge_degree", c.edge_degree},
            {"offdiag_min", c.offdiag_min},
            {"offdiag_max", c.offdiag_max},
            {"diag_margin", c.diag_margin},
            {"width_min", c.width_min},
            {"width_max", c.width_max},
            {"noise_std", c.noise_std},
            {"interaction_cap", c.interaction_cap}}},
          {"graph", edges},
          {"precision", precision},
          {"interactions", interactions}};
}

void save_task(const SyntheticTask& task, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_csv(task.dataset(), dir / "data.csv", "y");
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ConfigError("cannot write " + (dir / "manifest.json").string());
  out << task_manifest(task).dump(2) << '\n';
}

SyntheticTask load_task(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("task bundle has no manifest.json: " + dir.string());
  SyntheticTask task;
  try {
    const auto j = nlohmann::json::parse(in);
    task.p = j.at("p").get<int>();
    task.seed = j.at("seed").get<std::uint64_t>();
    task.effective_seed = j.at("effective_seed").get<std::uint64_t>();
    task.retries = j.at("retries").get<int>();
    const auto& c = j.at("constants");
    task.constants.edge_degree = c.at("edge_degree").get<double>();
    task.constants.offdiag_min = c.at("offdiag_min").get<double>();
    task.constants.offdiag_max = c.at("offdiag_max").get<double>();
    task.constants.diag_margin = c.at("diag_margin").get<double>();
    task.constants.width_min = c.at("width_min").get<double>();
    task.constants.width_max = c.at("width_max").get<double>();
    task.constants.noise_std = c.at("noise_std").get<double>();
    task.constants.interaction_cap = c.at("interaction_cap").get<std::size_t>();
    for (const auto& e : j.at("graph")) task.graph.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    task.precision.resize(task.p, task.p);
    const auto& prec = j.at("precision");
    for (int i = 0; i < task.p; ++i)
      for (int k = 0; k < task.p; ++k) task.precision(i, k) = prec.at(i).at(k).get<double>();
    for (const auto& it : j.at("interactions")) {
      Interaction x;
      x.vars = it.at("vars").get<VarSet>();
      x.beta = it.at("beta").get<double>();
      x.f = nonlinearity_from_string(it.at("f").get<std::string>());
      x.width = it.at("width").get<double>();
      task.interactions.push_back(std::move(x));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed task manifest: ") + e.what());
  }
  const Dataset data = load_csv(dir / "data.csv", std::string("y"));
  if (data.p() != task.p) throw ConfigError("task data width does not match its manifest");
  task.features = data.features;
  task.target = data.target;
  task.covariance = task.precision.llt().solve(Matrix::Identity(task.p, task.p));
  return task;
}

}  // namespace homnet
