#include "homnet/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "homnet/error.hpp"
#include "homnet/rng.hpp"

namespace homnet {

double r_squared(const Vector& truth, const Vector& pred) {
  if (truth.size() != pred.size()) throw ConfigError("r_squared: length mismatch");
  if (truth.size() < 2) throw ConfigError("r_squared: need at least 2 values");
  const double mean = truth.mean();
  const double sst = (truth.array() - mean).square().sum();
  if (!(sst > 0.0)) throw ConfigError("r_squared: target has zero variance");
  const double sse = (truth - pred).squaredNorm();
  return 1.0 - sse / sst;
}

std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Roster

ModelSpec ModelSpec::parse(const std::string& id) {
  ModelSpec s;
  s.id = id;
  const auto colon = id.find(':');
  const std::string head = id.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : id.substr(colon + 1);
  auto reference_of = [&](const std::string& a) {
    if (a.empty() || a == "marginal" || a == "hnn-marginal") return std::string("marginal");
    if (a == "ms" || a == "hnn-ms") return std::string("ms");
    if (a == "oracle" || a == "hnn-oracle") return std::string("oracle");
    throw ConfigError("unknown hierarchy reference '" + a + "' in model id '" + id + "'");
  };

  if (head == "hnn-marginal" && arg.empty()) {
    s.kind = ModelKind::hnn_marginal;
  } else if (head == "hnn-ms" && arg.empty()) {
    s.kind = ModelKind::hnn_ms;
    s.reference = "ms";
  } else if (head == "hnn-oracle" && arg.empty()) {
    s.kind = ModelKind::hnn_oracle;
    s.reference = "oracle";
  } else if (head == "hnn-rand-oracle" && arg.empty()) {
    s.kind = ModelKind::hnn_rand_oracle;
    s.reference = "oracle";
  } else if (head == "mlp-hnn") {
    s.kind = ModelKind::mlp_hnn;
    s.reference = reference_of(arg);
  } else if (head == "mlp") {
    s.kind = ModelKind::mlp;
    const auto x = arg.find('x');
    int width = 0, depth = 0;
    if (x == std::string::npos ||
        std::from_chars(arg.data(), arg.data() + x, width).ec != std::errc() ||
        std::from_chars(arg.data() + x + 1, arg.data() + arg.size(), depth).ec != std::errc() || width < 1 ||
        depth < 1)
      throw ConfigError("MLP model id must look like mlp:WIDTHxDEPTH, got '" + id + "'");
    s.widths.assign(static_cast<std::size_t>(depth), width);
  } else if (head == "pm-mlp") {
    s.kind = ModelKind::pm_mlp;
    std::size_t target = 0;
    if (!arg.empty() && std::from_chars(arg.data(), arg.data() + arg.size(), target).ec == std::errc() &&
        std::to_string(target) == arg) {
      s.pm_target = target;
      s.reference.clear();
    } else {
      s.reference = reference_of(arg);
    }
  } else if (head == "external") {
    if (arg.empty()) throw ConfigError("external model needs a predictions path: external:<file.csv>");
    s.kind = ModelKind::external;
    s.path = arg;
  } else {
    throw ConfigError("unknown model id '" + id + "'");
  }
  return s;
}

bool ModelSpec::needs_oracle() const {
  return kind == ModelKind::hnn_oracle || kind == ModelKind::hnn_rand_oracle ||
         ((kind == ModelKind::mlp_hnn || kind == ModelKind::pm_mlp) && reference == "oracle");
}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (roster.empty()) throw ConfigError("model roster is empty");
  if (!synthetic && csv.empty()) throw ConfigError("no tasks configured (need a synthetic grid or CSV datasets)");
  if (seeds.empty()) throw ConfigError("no training seeds configured");
  if (!(val_frac > 0.0 && val_frac < 1.0)) throw ConfigError("val_frac must lie in (0, 1)");
  if (workers < 1) throw ConfigError("worker count must be positive");
  train.validate();
  mfcf.validate();
  std::set<std::string> ids;
  for (const auto& m : roster) {
    if (!ids.insert(m.id).second) throw ConfigError("duplicate model id '" + m.id + "' in roster");
    if (m.needs_oracle() && !csv.empty())
      throw ConfigError("model '" + m.id + "' needs ground-truth interactions and is only valid for synthetic tasks");
    if (m.kind == ModelKind::external && synthetic)
      throw ConfigError("external predictions are only supported for CSV tasks");
  }
  if (synthetic) {
    if (synthetic->cells.empty()) throw ConfigError("synthetic grid has no (p, n) cells");
    if (synthetic->replicates < 1) throw ConfigError("synthetic replicates must be positive");
    for (auto [p, n] : synthetic->cells)
      if (p < 2 || n < 5) throw ConfigError("synthetic cell needs p >= 2 and n >= 5");
  }
}

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    read_opt(j, "val_frac", cfg.val_frac);
    read_opt(j, "workers", cfg.workers);
    read_opt(j, "seeds", cfg.seeds);
    for (const auto& m : j.at("roster")) cfg.roster.push_back(ModelSpec::parse(m.get<std::string>()));

    if (j.contains("train")) {
      const auto& t = j.at("train");
      read_opt(t, "learning_rate", cfg.train.learning_rate);
      read_opt(t, "batch_size", cfg.train.batch_size);
      read_opt(t, "max_epochs", cfg.train.max_epochs);
      read_opt(t, "patience", cfg.train.patience);
      read_opt(t, "min_delta", cfg.train.min_delta);
      read_opt(t, "beta1", cfg.train.beta1);
      read_opt(t, "beta2", cfg.train.beta2);
      read_opt(t, "epsilon", cfg.train.epsilon);
    }
    if (j.contains("mfcf")) {
      const auto& m = j.at("mfcf");
      read_opt(m, "max_clique_size", cfg.mfcf.max_clique_size);
      read_opt(m, "min_clique_size", cfg.mfcf.min_clique_size);
      read_opt(m, "gain_threshold", cfg.mfcf.gain_threshold);
      read_opt(m, "randomize_ties", cfg.mfcf.randomize_ties);
    }
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      SyntheticGrid g;
      if (s.contains("cells"))
        for (const auto& c : s.at("cells")) g.cells.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
      if (s.contains("p")) {
        for (int p : s.at("p").get<std::vector<int>>())
          for (double ratio : s.at("p_over_n").get<std::vector<double>>())
            g.cells.emplace_back(p, static_cast<int>(std::lround(p / ratio)));
      }
      read_opt(s, "replicates", g.replicates);
      read_opt(s, "base_seed", g.base_seed);
      read_opt(s, "test_size_min", g.test_size_min);
      read_opt(s, "noise_std", g.constants.noise_std);
      read_opt(s, "interaction_cap", g.constants.interaction_cap);
      cfg.synthetic = g;
    }
    if (j.contains("csv")) {
      for (const auto& c : j.at("csv")) {
        CsvSource src;
        src.path = c.at("path").get<std::string>();
        src.name = c.value("name", src.path.stem().string());
        if (c.contains("target")) {
          if (c.at("target").is_number_integer())
            src.target = c.at("target").get<int>();
          else
            src.target = c.at("target").get<std::string>();
        }
        if (c.contains("folds") && !c.at("folds").is_null()) src.fold_file = c.at("folds").get<std::string>();
        read_opt(c, "k_folds", src.k_folds);
        read_opt(c, "split_seed", src.split_seed);
        cfg.csv.push_back(std::move(src));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Records

std::string RunRecord::key() const {
  return task + '\t' + model + '\t' + std::to_string(seed) + '\t' + std::to_string(fold);
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j = {{"task", r.task},       {"model", r.model},       {"seed", r.seed},
                      {"fold", r.fold},       {"ok", r.ok},             {"p", r.p},
                      {"n", r.n},             {"params", r.params},     {"wall_seconds", r.wall_seconds},
                      {"stopped_epoch", r.stopped_epoch}};
  if (r.ok) {
    j["test_r2"] = r.test_r2;
    j["test_mse"] = r.test_mse;
    j["train_mse"] = r.train_mse;
    j["val_mse"] = r.val_mse;
  } else {
    j["error"] = r.error;
  }
  return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.task = j.at("task").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.fold = j.at("fold").get<int>();
  r.ok = j.at("ok").get<bool>();
  r.p = j.value("p", 0);
  r.n = j.value("n", 0L);
  r.params = j.value("params", std::size_t{0});
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.stopped_epoch = j.value("stopped_epoch", 0);
  if (r.ok) {
    r.test_r2 = j.at("test_r2").get<double>();
    r.test_mse = j.at("test_mse").get<double>();
    r.train_mse = j.value("train_mse", 0.0);
    r.val_mse = j.value("val_mse", 0.0);
  } else {
    r.error = j.value("error", std::string());
  }
  return r;
}

std::vector<RunRecord> load_records(const std::filesystem::path& path) {
  std::vector<RunRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception&) {
      // A torn final line from an interrupted write; that run is redone.
    }
  }
  return out;
}

void append_record(const std::filesystem::path& path, const RunRecord& r) {
  const std::string line = to_json(r).dump() + '\n';
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw RuntimeFailure("cannot append to " + path.string());
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.flush();
}

// ---------------------------------------------------------------------------
// Structure and models

InteractionHierarchy estimate_hierarchy(const PreparedData& data, const std::string& variant, const MfcfConfig& mfcf) {
  if (variant == "oracle") {
    if (!data.synthetic) throw ConfigError("oracle structure requires a synthetic task");
    return oracle_hierarchy(data.synthetic->interaction_sets(), data.p);
  }
  if (variant == "marginal") {
    const auto m = marginal_dependency(data.train.features);
    return from_cliques(build_mfcf(m, mfcf).cliques, data.p);
  }
  if (variant == "ms") {
    const auto split = median_split_dependency(data.train.features, data.train.target);
    const auto low = from_cliques(build_mfcf(split.low, mfcf).cliques, data.p);
    const auto high = from_cliques(build_mfcf(split.high, mfcf).cliques, data.p);
    return hierarchy_union(low, high);
  }
  throw ConfigError("unknown structure variant '" + variant + "'");
}

Network build_model(const ModelSpec& spec, const PreparedData& data, const MfcfConfig& mfcf, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::hnn_marginal:
    case ModelKind::hnn_ms:
    case ModelKind::hnn_oracle: {
      Network net = build_hnn(estimate_hierarchy(data, spec.reference, mfcf));
      net.kind = spec.id;
      return net;
    }
    case ModelKind::hnn_rand_oracle: {
      const auto h = estimate_hierarchy(data, "oracle", mfcf);
      Network net = build_hnn(randomize(h, Rng(seed).split("wiring").seed()));
      net.kind = spec.id;
      return net;
    }
    case ModelKind::mlp_hnn: {
      Network net = build_mlp_hnn(estimate_hierarchy(data, spec.reference, mfcf));
      net.kind = spec.id;
      return net;
    }
    case ModelKind::mlp: {
      Network net = build_mlp(data.p, spec.widths);
      net.kind = spec.id;
      return net;
    }
    case ModelKind::pm_mlp: {
      const std::size_t target =
          spec.reference.empty() ? spec.pm_target : param_count(estimate_hierarchy(data, spec.reference, mfcf));
      if (target < static_cast<std::size_t>(data.p) + 3)
        throw ConfigError("parameter-matched MLP target " + std::to_string(target) + " is below p + 3");
      Network net = build_pm_mlp(data.p, target);
      net.kind = spec.id;
      return net;
    }
    case ModelKind::external: break;
  }
  throw ConfigError("model '" + spec.id + "' has no network");
}

// ---------------------------------------------------------------------------
// Experiment

namespace {

std::string synth_task_id(int p, int n) { return "synth-p" + std::to_string(p) + "-n" + std::to_string(n); }

PreparedData standardize(std::string task, int fold, const Dataset& train_raw, const Dataset& val_raw,
                         const Dataset& test_raw) {
  PreparedData d;
  d.task = std::move(task);
  d.fold = fold;
  d.p = static_cast<int>(train_raw.p());
  d.scaler = fit_scaler(train_raw);
  d.train = d.scaler.apply(train_raw);
  d.val = d.scaler.apply(val_raw);
  d.test = d.scaler.apply(test_raw);
  d.test_target_raw = test_raw.target;
  return d;
}

}  // namespace

PreparedData prepare_synthetic(SyntheticTask task, const std::string& task_id, int fold, double val_frac,
                               Eigen::Index test_size_min) {
  const Dataset all = task.dataset();
  const Eigen::Index n = all.n();
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<int> train_rows, val_rows;
  holdout_split(rows, val_frac, Rng(task.effective_seed).split("validation").seed(), train_rows, val_rows);
  const Dataset test =
      sample_task_rows(task, std::max<Eigen::Index>(n, test_size_min), Rng(task.effective_seed).split("test").seed());
  PreparedData d = standardize(task_id, fold, all.subset(train_rows), all.subset(val_rows), test);
  d.n = static_cast<long>(n);
  d.synthetic = std::move(task);
  return d;
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (const auto& src : cfg_.csv) {
    Dataset data = load_csv(src.path, src.target);
    SplitPlan plan = src.fold_file ? splits_from_folds(load_fold_file(*src.fold_file, data.n()), cfg_.val_frac, src.split_seed)
                                   : make_splits(data.n(), src.k_folds, cfg_.val_frac, src.split_seed);
    if (csv_data_.count(src.name)) throw ConfigError("duplicate CSV task name '" + src.name + "'");
    csv_plans_.emplace(src.name, std::move(plan));
    csv_data_.emplace(src.name, std::move(data));
  }
}

std::vector<std::string> Experiment::task_ids() const {
  std::vector<std::string> ids;
  if (cfg_.synthetic)
    for (auto [p, n] : cfg_.synthetic->cells) ids.push_back(synth_task_id(p, n));
  for (const auto& src : cfg_.csv) ids.push_back(src.name);
  return ids;
}

std::vector<Experiment::Job> Experiment::jobs() const {
  std::vector<Job> out;
  auto push_task = [&](const std::string& task, int folds) {
    for (int f = 0; f < folds; ++f)
      for (std::size_t m = 0; m < cfg_.roster.size(); ++m)
        for (auto seed : cfg_.seeds) out.push_back({task, f, m, seed});
  };
  if (cfg_.synthetic)
    for (auto [p, n] : cfg_.synthetic->cells) push_task(synth_task_id(p, n), cfg_.synthetic->replicates);
  for (const auto& src : cfg_.csv) push_task(src.name, csv_plans_.at(src.name).k_folds);
  return out;
}

PreparedData Experiment::prepare(const std::string& task, int fold) const {
  if (cfg_.synthetic) {
    for (auto [p, n] : cfg_.synthetic->cells) {
      if (synth_task_id(p, n) != task) continue;
      const auto& g = *cfg_.synthetic;
      const std::uint64_t task_seed = Rng(g.base_seed).split(task).split(static_cast<std::uint64_t>(fold)).seed();
      PreparedData d = prepare_synthetic(gen_task(p, n, task_seed, g.constants), task, fold, cfg_.val_frac,
                                         g.test_size_min);
      return d;
    }
  }
  const auto it = csv_data_.find(task);
  if (it == csv_data_.end()) throw ConfigError("unknown task '" + task + "'");
  const auto rows = csv_plans_.at(task).rows_for(fold);
  PreparedData d =
      standardize(task, fold, it->second.subset(rows.train), it->second.subset(rows.val), it->second.subset(rows.test));
  d.n = static_cast<long>(it->second.n());
  d.test_rows = rows.test;
  return d;
}

namespace {

Vector load_external_predictions(const std::string& pattern, int fold, const std::vector<int>& rows) {
  std::string path = pattern;
  if (const auto pos = path.find("{fold}"); pos != std::string::npos) path.replace(pos, 6, std::to_string(fold));
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open external predictions " + path);
  std::map<int, double> by_row;
  std::string line;
  std::getline(in, line);  // header: row_index,prediction
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw RuntimeFailure("malformed external prediction line: " + line);
    int row = 0;
    double v = 0.0;
    const char* end = line.data() + line.size();
    if (!line.empty() && line.back() == '\r') --end;
    if (std::from_chars(line.data(), line.data() + comma, row).ec != std::errc() ||
        std::from_chars(line.data() + comma + 1, end, v).ec != std::errc())
      throw RuntimeFailure("malformed external prediction line: " + line);
    by_row[row] = v;
  }
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto f = by_row.find(rows[i]);
    if (f == by_row.end()) throw RuntimeFailure("external predictions miss test row " + std::to_string(rows[i]));
    out(static_cast<Eigen::Index>(i)) = f->second;
  }
  return out;
}

}  // namespace

RunRecord Experiment::execute(const Job& job) const {
  const auto& spec = cfg_.roster[job.model];
  RunRecord rec;
  rec.task = job.task;
  rec.model = spec.id;
  rec.seed = job.seed;
  rec.fold = job.fold;
  const auto start = std::chrono::steady_clock::now();
  try {
    const PreparedData data = prepare(job.task, job.fold);
    rec.p = data.p;
    rec.n = data.n;
    Vector pred;
    if (spec.kind == ModelKind::external) {
      pred = load_external_predictions(spec.path, job.fold, data.test_rows);
    } else {
      const std::uint64_t run_seed = Rng(job.seed).split(job.task).split(static_cast<std::uint64_t>(job.fold)).seed();
      Network net = build_model(spec, data, cfg_.mfcf, run_seed);
      init_params(net, run_seed);
      TrainConfig tc = cfg_.train;
      tc.seed = run_seed;
      const TrainResult tr = fit(net, data.train, data.val, tc);
      rec.params = net.size();
      rec.stopped_epoch = tr.stopped_epoch;
      rec.val_mse = tr.best_val_mse;
      rec.train_mse = tr.history[static_cast<std::size_t>(tr.best_epoch - 1)].train_mse;
      pred = data.scaler.invert_target(predict(net, data.test.features));
    }
    rec.test_r2 = r_squared(data.test_target_raw, pred);
    rec.test_mse = (data.test_target_raw - pred).squaredNorm() / static_cast<double>(pred.size());
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<RunRecord> Experiment::run() {
  std::filesystem::create_directories(cfg_.output_dir);
  const auto store = cfg_.output_dir / "records.jsonl";
  std::vector<RunRecord> records = load_records(store);
  std::set<std::string> done;
  for (const auto& r : records) done.insert(r.key());

  std::vector<Job> pending;
  for (const auto& job : jobs()) {
    RunRecord probe;
    probe.task = job.task;
    probe.model = cfg_.roster[job.model].id;
    probe.seed = job.seed;
    probe.fold = job.fold;
    if (!done.count(probe.key())) pending.push_back(job);
  }

  std::mutex lock;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      Job job;
      {
        std::lock_guard<std::mutex> g(lock);
        if (next >= pending.size()) return;
        job = pending[next++];
      }
      RunRecord rec = execute(job);
      std::lock_guard<std::mutex> g(lock);
      append_record(store, rec);
      records.push_back(std::move(rec));
    }
  };
  const int n_workers = std::max(1, std::min<int>(cfg_.workers, static_cast<int>(pending.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) { return a.key() < b.key(); });
  return records;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) { return Experiment(cfg).run(); }

// ---------------------------------------------------------------------------
// Aggregation

std::vector<double> descending_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

RankTable aggregate_ranks(const std::vector<RunRecord>& records) {
  if (records.empty()) throw ConfigError("aggregate_ranks: no records");
  RankTable t;
  std::set<std::string> models, tasks;
  for (const auto& r : records) {
    models.insert(r.model);
    tasks.insert(r.task);
  }
  t.models.assign(models.begin(), models.end());
  t.tasks.assign(tasks.begin(), tasks.end());

  // Cells (fold, seed) seen per task; a model missing one of them is treated as failed there.
  std::map<std::string, std::set<std::pair<int, std::uint64_t>>> cells;
  std::map<std::string, std::map<std::string, std::set<std::pair<int, std::uint64_t>>>> have;
  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> sums;
  for (const auto& r : records) {
    cells[r.task].insert({r.fold, r.seed});
    have[r.task][r.model].insert({r.fold, r.seed});
    if (!r.ok) {
      t.failed[r.task][r.model] = true;
      continue;
    }
    auto& s = sums[r.task][r.model];
    s.first += r.test_r2;
    s.second += 1;
    auto& range = t.param_range.try_emplace(r.model, r.params, r.params).first->second;
    range.first = std::min(range.first, r.params);
    range.second = std::max(range.second, r.params);
  }

  std::map<std::string, double> rank_sum;
  for (const auto& task : t.tasks) {
    std::vector<double> scores;
    std::vector<std::string> ok_models, failed_models;
    for (const auto& m : t.models) {
      bool failed = t.failed[task][m] || have[task][m] != cells[task] || !sums[task].count(m);
      t.failed[task][m] = failed;
      if (failed) {
        failed_models.push_back(m);
      } else {
        const auto& s = sums[task][m];
        const double mean = s.first / static_cast<double>(s.second);
        t.task_mean_r2[task][m] = mean;
        ok_models.push_back(m);
        scores.push_back(mean);
      }
    }
    const auto ranks = descending_ranks(scores);
    for (std::size_t i = 0; i < ok_models.size(); ++i) t.task_rank[task][ok_models[i]] = ranks[i];
    // Failed cells share the trailing ranks.
    if (!failed_models.empty()) {
      const double first = static_cast<double>(ok_models.size()) + 1.0;
      const double last = static_cast<double>(t.models.size());
      for (const auto& m : failed_models) t.task_rank[task][m] = 0.5 * (first + last);
    }
    for (const auto& m : t.models) rank_sum[m] += t.task_rank[task][m];
  }
  for (const auto& m : t.models) t.mean_rank[m] = rank_sum[m] / static_cast<double>(t.tasks.size());
  return t;
}

bool check_rank_equivalence(const std::vector<RunRecord>& records) {
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const auto& r : records)
    if (r.ok) groups[r.task + '\t' + std::to_string(r.fold) + '\t' + std::to_string(r.seed)].push_back(&r);
  for (const auto& [key, rs] : groups) {
    for (std::size_t a = 0; a < rs.size(); ++a)
      for (std::size_t b = 0; b < rs.size(); ++b) {
        if (rs[a]->test_r2 > rs[b]->test_r2 && !(rs[a]->test_mse <= rs[b]->test_mse)) return false;
        if (rs[a]->test_mse < rs[b]->test_mse && !(rs[a]->test_r2 >= rs[b]->test_r2)) return false;
      }
  }
  return true;
}

std::vector<CurvePoint> r2_curve(const std::vector<RunRecord>& records) {
  std::map<std::tuple<std::string, int, long>, std::vector<double>> groups;
  for (const auto& r : records)
    if (r.ok) groups[{r.model, r.p, r.n}].push_back(r.test_r2);
  std::vector<CurvePoint> out;
  for (const auto& [key, vals] : groups) {
    CurvePoint c;
    c.model = std::get<0>(key);
    c.p = std::get<1>(key);
    c.n = std::get<2>(key);
    c.count = vals.size();
    double sum = 0.0;
    for (double v : vals) sum += v;
    c.mean_r2 = sum / static_cast<double>(vals.size());
    if (vals.size() >= 2) {
      double ss = 0.0;
      for (double v : vals) ss += (v - c.mean_r2) * (v - c.mean_r2);
      const double sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
      c.sem = sd / std::sqrt(static_cast<double>(vals.size()));
    }
    out.push_back(c);
  }
  return out;
}

nlohmann::json to_json(const RankTable& t) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : t.models) {
    nlohmann::json entry = {{"model", m}, {"mean_rank", t.mean_rank.at(m)}};
    if (const auto it = t.param_range.find(m); it != t.param_range.end())
      entry["params"] = {it->second.first, it->second.second};
    else
      entry["params"] = nullptr;
    models.push_back(std::move(entry));
  }
  nlohmann::json tasks = nlohmann::json::object();
  for (const auto& task : t.tasks) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& m : t.models) {
      nlohmann::json cell = {{"rank", t.task_rank.at(task).at(m)}, {"failed", t.failed.at(task).at(m)}};
      const auto& r2 = t.task_mean_r2.count(task) ? t.task_mean_r2.at(task) : std::map<std::string, double>{};
      cell["mean_r2"] = r2.count(m) ? nlohmann::json(r2.at(m)) : nlohmann::json(nullptr);
      row[m] = std::move(cell);
    }
    tasks[task] = std::move(row);
  }
  return {{"models", models}, {"tasks", tasks}};
}

void report(const RankTable& table, const std::vector<RunRecord>& records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + (dir / name).string());
    return out;
  };

  {
    // Ordered by mean rank, then name.
    std::vector<std::string> order = table.models;
    std::stable_sort(order.begin(), order.end(),
                     [&](const std::string& a, const std::string& b) { return table.mean_rank.at(a) < table.mean_rank.at(b); });
    auto out = open("rank_table.csv");
    out << "model,mean_rank,params_min,params_max,failed_tasks\n";
    for (const auto& m : order) {
      int failed = 0;
      for (const auto& task : table.tasks) failed += table.failed.at(task).at(m) ? 1 : 0;
      const auto it = table.param_range.find(m);
      out << m << ',' << format_number(table.mean_rank.at(m)) << ','
          << (it != table.param_range.end() ? std::to_string(it->second.first) : "") << ','
          << (it != table.param_range.end() ? std::to_string(it->second.second) : "") << ',' << failed << '\n';
    }
  }
  {
    auto out = open("rank_table.json");
    out << to_json(table).dump(2) << '\n';
  }
  {
    std::vector<RunRecord> sorted = records;
    std::sort(sorted.begin(), sorted.end(), [](const RunRecord& a, const RunRecord& b) { return a.key() < b.key(); });
    auto out = open("records.csv");
    out << "task,model,seed,fold,ok,p,n,test_r2,test_mse,train_mse,val_mse,params,stopped_epoch,wall_seconds,error\n";
    for (const auto& r : sorted) {
      out << r.task << ',' << r.model << ',' << r.seed << ',' << r.fold << ',' << (r.ok ? 1 : 0) << ',' << r.p << ','
          << r.n << ',';
      if (r.ok)
        out << format_number(r.test_r2) << ',' << format_number(r.test_mse) << ',' << format_number(r.train_mse) << ','
            << format_number(r.val_mse);
      else
        out << ",,,";
      std::string err = r.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      out << ',' << r.params << ',' << r.stopped_epoch << ',' << format_number(r.wall_seconds) << ',' << err << '\n';
    }
  }
  {
    auto out = open("r2_curve.csv");
    out << "model,p,n,p_over_n,mean_r2,sem,count\n";
    for (const auto& c : r2_curve(records)) {
      out << c.model << ',' << c.p << ',' << c.n << ','
          << (c.n > 0 ? format_number(static_cast<double>(c.p) / static_cast<double>(c.n)) : "") << ','
          << format_number(c.mean_r2) << ',' << (c.sem ? format_number(*c.sem) : "null") << ',' << c.count << '\n';
    }
  }
}

}  // namespace homnet
