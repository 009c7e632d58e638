// homnet command line: synthetic task generation, structure learning,
// single training runs, sweeps and reports.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "homnet/bench.hpp"
#include "homnet/error.hpp"

namespace fs = std::filesystem;
using namespace homnet;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeFailure = 2;

ColumnRef parse_column(const std::string& s) {
  if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) return std::stoi(s);
  return s;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int workers_from_env(int fallback) {
  if (const char* env = std::getenv("HOMNET_WORKERS")) {
    const int w = std::atoi(env);
    if (w < 1) throw ConfigError("HOMNET_WORKERS must be a positive integer");
    return w;
  }
  return fallback;
}

struct DataArgs {
  std::string task_dir;
  std::string csv;
  std::string target = "y";
  std::string folds;
  int fold = 0;
  int k_folds = 5;
  std::uint64_t split_seed = 0;
  double val_frac = 0.2;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--task", a.task_dir, "Synthetic task bundle directory (from synth-gen)");
  cmd->add_option("--csv", a.csv, "CSV dataset");
  cmd->add_option("--target", a.target, "Target column name or index (CSV)");
  cmd->add_option("--folds", a.folds, "Fold file, one fold id per row (CSV)");
  cmd->add_option("--fold", a.fold, "Fold used as the test split");
  cmd->add_option("--k-folds", a.k_folds, "Number of folds when no fold file is given");
  cmd->add_option("--split-seed", a.split_seed, "Seed for fold assignment and validation hold-out");
  cmd->add_option("--val-frac", a.val_frac, "Validation fraction of the training rows");
}

/// Train/val/test data for the single-run commands. Synthetic bundles are
/// split into train/val plus a fresh test sample from the stored task.
PreparedData prepare_single(const DataArgs& a) {
  if (a.task_dir.empty() == a.csv.empty()) throw ConfigError("give exactly one of --task or --csv");
  ExperimentConfig cfg;
  cfg.val_frac = a.val_frac;
  cfg.roster = {ModelSpec::parse("mlp:1x1")};
  if (!a.csv.empty()) {
    CsvSource src;
    src.name = fs::path(a.csv).stem().string();
    src.path = a.csv;
    src.target = parse_column(a.target);
    if (!a.folds.empty()) src.fold_file = a.folds;
    src.k_folds = a.k_folds;
    src.split_seed = a.split_seed;
    cfg.csv.push_back(src);
    return Experiment(cfg).prepare(src.name, a.fold);
  }
  return prepare_synthetic(load_task(a.task_dir), fs::path(a.task_dir).filename().string(), 0, a.val_frac);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homnet: clique-forest structure learning and sparse interaction networks"};
  app.require_subcommand(1);

  // synth-gen
  auto* gen = app.add_subcommand("synth-gen", "Generate a synthetic task bundle");
  int gen_p = 50, gen_n = 1000;
  std::uint64_t gen_seed = 0;
  double gen_noise = 0.5;
  std::string gen_out;
  gen->add_option("--p", gen_p, "Number of features")->required();
  gen->add_option("--n", gen_n, "Number of samples")->required();
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--noise", gen_noise, "Noise standard deviation");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // structure
  auto* structure = app.add_subcommand("structure", "Dump dependency matrix, clique forest and hierarchy");
  DataArgs st_data;
  add_data_options(structure, st_data);
  std::string st_variant = "marginal", st_out;
  int st_k = 4;
  double st_threshold = 0.0;
  structure->add_option("--variant", st_variant, "marginal | ms | oracle")
      ->check(CLI::IsMember({"marginal", "ms", "oracle"}));
  structure->add_option("--max-clique", st_k, "Maximum clique size K");
  structure->add_option("--gain-threshold", st_threshold, "MFCF gain threshold");
  structure->add_option("--out", st_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train and evaluate a single model");
  DataArgs tr_data;
  add_data_options(train, tr_data);
  std::string tr_model = "hnn-marginal", tr_out;
  std::uint64_t tr_seed = 0;
  TrainConfig tr_cfg;
  MfcfConfig tr_mfcf;
  train->add_option("--model", tr_model, "Model id (see README)");
  train->add_option("--seed", tr_seed, "Training seed");
  train->add_option("--lr", tr_cfg.learning_rate, "Learning rate");
  train->add_option("--batch-size", tr_cfg.batch_size, "Batch size");
  train->add_option("--max-epochs", tr_cfg.max_epochs, "Epoch limit");
  train->add_option("--patience", tr_cfg.patience, "Early-stopping patience (epochs)");
  train->add_option("--min-delta", tr_cfg.min_delta, "Minimum validation improvement");
  train->add_option("--max-clique", tr_mfcf.max_clique_size, "Maximum clique size K");
  train->add_option("--out", tr_out, "Output directory for checkpoint, history and record");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a full experiment from a JSON config");
  std::string sw_config, sw_out;
  int sw_workers = 0;
  sweep->add_option("--config", sw_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", sw_out, "Override output directory");
  sweep->add_option("--workers", sw_workers, "Worker threads (default: HOMNET_WORKERS or config)");

  // report
  auto* rep = app.add_subcommand("report", "Aggregate run records into rank tables and curve data");
  std::string rep_records, rep_out;
  rep->add_option("--records", rep_records, "records.jsonl or a sweep output directory")->required();
  rep->add_option("--out", rep_out, "Output directory (default: next to the records)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) {
      SynthConstants c;
      c.noise_std = gen_noise;
      const SyntheticTask task = gen_task(gen_p, gen_n, gen_seed, c);
      save_task(task, gen_out);
      std::cout << "wrote task p=" << task.p << " n=" << task.features.rows() << " interactions=" << task.interactions.size()
                << " edges=" << task.graph.size() << " to " << gen_out << '\n';
    } else if (*structure) {
      const PreparedData data = prepare_single(st_data);
      MfcfConfig mfcf;
      mfcf.max_clique_size = st_k;
      mfcf.gain_threshold = st_threshold;
      fs::create_directories(st_out);
      if (st_variant == "marginal") {
        const auto m = marginal_dependency(data.train.features);
        save_matrix_csv(m.values, fs::path(st_out) / "dependency.csv");
        const auto forest = build_mfcf(m, mfcf);
        write_json(fs::path(st_out) / "forest.json", to_json(forest));
      } else if (st_variant == "ms") {
        const auto split = median_split_dependency(data.train.features, data.train.target);
        save_matrix_csv(split.low.values, fs::path(st_out) / "dependency_low.csv");
        save_matrix_csv(split.high.values, fs::path(st_out) / "dependency_high.csv");
        write_json(fs::path(st_out) / "forest_low.json", to_json(build_mfcf(split.low, mfcf)));
        write_json(fs::path(st_out) / "forest_high.json", to_json(build_mfcf(split.high, mfcf)));
      }
      const auto h = estimate_hierarchy(data, st_variant, mfcf);
      write_json(fs::path(st_out) / "hierarchy.json", to_json(h));
      std::cout << "hierarchy:";
      for (int k = 1; k <= h.k_max(); ++k) std::cout << " |H" << k << "|=" << h.units(k);
      std::cout << " params=" << param_count(h) << '\n';
    } else if (*train) {
      const auto start = std::chrono::steady_clock::now();
      const PreparedData data = prepare_single(tr_data);
      const ModelSpec spec = ModelSpec::parse(tr_model);
      if (spec.kind == ModelKind::external) throw ConfigError("train does not handle external models");
      Network net = build_model(spec, data, tr_mfcf, tr_seed);
      init_params(net, tr_seed);
      tr_cfg.seed = tr_seed;
      const TrainResult result = fit(net, data.train, data.val, tr_cfg);
      const Vector pred = data.scaler.invert_target(predict(net, data.test.features));
      const double r2 = r_squared(data.test_target_raw, pred);
      std::cout << "model=" << spec.id << " params=" << net.size() << " epochs=" << result.stopped_epoch
                << " best_epoch=" << result.best_epoch << " val_mse=" << result.best_val_mse << " test_r2=" << r2 << '\n';
      if (!tr_out.empty()) {
        fs::create_directories(tr_out);
        save_checkpoint(net, fs::path(tr_out) / "model.homnet", {{"seed", tr_seed}, {"model", spec.id}});
        save_history_csv(result, fs::path(tr_out) / "history.csv");
        RunRecord rec;
        rec.task = data.task;
        rec.model = spec.id;
        rec.seed = tr_seed;
        rec.fold = tr_data.fold;
        rec.p = data.p;
        rec.n = data.n;
        rec.test_r2 = r2;
        rec.test_mse = (data.test_target_raw - pred).squaredNorm() / static_cast<double>(pred.size());
        rec.val_mse = result.best_val_mse;
        rec.train_mse = result.history[static_cast<std::size_t>(result.best_epoch - 1)].train_mse;
        rec.params = net.size();
        rec.stopped_epoch = result.stopped_epoch;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_json(fs::path(tr_out) / "record.json", to_json(rec));
      }
    } else if (*sweep) {
      std::ifstream in(sw_config);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("cannot parse config: ") + e.what());
      }
      ExperimentConfig cfg = config_from_json(j);
      if (!sw_out.empty()) cfg.output_dir = sw_out;
      cfg.workers = sw_workers > 0 ? sw_workers : workers_from_env(cfg.workers);
      Experiment exp(cfg);
      const auto records = exp.run();
      const auto table = aggregate_ranks(records);
      report(table, records, cfg.output_dir);
      std::size_t failed = 0;
      for (const auto& r : records) failed += r.ok ? 0 : 1;
      std::cout << "sweep finished: " << records.size() << " records (" << failed << " failed) in "
                << cfg.output_dir.string() << '\n';
    } else if (*rep) {
      fs::path path = rep_records;
      if (fs::is_directory(path)) path /= "records.jsonl";
      if (!fs::exists(path)) throw ConfigError("no records at " + path.string());
      const auto records = load_records(path);
      const auto table = aggregate_ranks(records);
      const fs::path out = rep_out.empty() ? path.parent_path() : fs::path(rep_out);
      report(table, records, out);
      std::vector<std::string> order = table.models;
      std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return table.mean_rank.at(a) < table.mean_rank.at(b);
      });
      for (const auto& m : order) std::cout << m << '\t' << table.mean_rank.at(m) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}
