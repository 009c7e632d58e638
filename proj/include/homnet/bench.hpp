#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homnet/data.hpp"
#include "homnet/depgraph.hpp"
#include "homnet/hierarchy.hpp"
#include "homnet/mfcf.hpp"
#include "homnet/net.hpp"
#include "homnet/synth.hpp"
#include "homnet/train.hpp"

namespace homnet {

/// 1 - SSE / SST with the mean taken over `truth`. Throws ConfigError when
/// the lengths differ, n < 2, or `truth` has zero variance.
double r_squared(const Vector& truth, const Vector& pred);

enum class ModelKind { hnn_marginal, hnn_ms, hnn_oracle, hnn_rand_oracle, mlp_hnn, mlp, pm_mlp, external };

/**
 * One roster entry. Accepted ids:
 *   hnn-marginal, hnn-ms, hnn-oracle, hnn-rand-oracle,
 *   mlp-hnn[:marginal|ms|oracle]          dense layers over that hierarchy (default marginal)
 *   mlp:WxD                                D hidden layers of width W
 *   pm-mlp[:N | :hnn-marginal | :hnn-ms | :hnn-oracle]   parameter-matched MLP (default hnn-marginal)
 *   external:<csv path>                    predictions made elsewhere; "{fold}" in the path is substituted
 */
struct ModelSpec {
  std::string id;
  ModelKind kind = ModelKind::hnn_marginal;
  std::vector<int> widths;         // mlp
  std::size_t pm_target = 0;       // pm-mlp with an explicit count
  std::string reference = "marginal";  // hierarchy behind mlp-hnn / pm-mlp
  std::string path;                // external

  static ModelSpec parse(const std::string& id);
  bool needs_oracle() const;
};

struct SyntheticGrid {
  std::vector<std::pair<int, int>> cells;  // (p, n)
  int replicates = 1;                      // independent task draws per cell
  std::uint64_t base_seed = 0;
  Eigen::Index test_size_min = 2000;
  SynthConstants constants;
};

struct CsvSource {
  std::string name;
  std::filesystem::path path;
  ColumnRef target = std::string("y");
  std::optional<std::filesystem::path> fold_file;
  int k_folds = 5;
  std::uint64_t split_seed = 0;
};

struct ExperimentConfig {
  std::optional<SyntheticGrid> synthetic;
  std::vector<CsvSource> csv;
  std::vector<ModelSpec> roster;
  std::vector<std::uint64_t> seeds = {0};
  TrainConfig train;
  MfcfConfig mfcf;
  double val_frac = 0.2;
  int workers = 1;
  std::filesystem::path output_dir = "homnet-out";

  /// Throws ConfigError on an empty roster, no tasks, or oracle models on CSV tasks.
  void validate() const;
};

/// Reads the JSON config format documented in the README.
ExperimentConfig config_from_json(const nlohmann::json& j);

struct RunRecord {
  std::string task;
  std::string model;
  std::uint64_t seed = 0;
  int fold = 0;  // CV fold for CSV tasks; task realization for synthetic cells
  bool ok = true;
  std::string error;
  int p = 0;
  long n = 0;
  double test_r2 = 0.0;
  double test_mse = 0.0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  std::size_t params = 0;
  double wall_seconds = 0.0;
  int stopped_epoch = 0;

  std::string key() const;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

/// Standardized train/val/test splits and the scaler for one (task, fold).
struct PreparedData {
  std::string task;
  int fold = 0;
  int p = 0;
  long n = 0;  // nominal sample size of the task (before splitting)
  Scaler scaler;
  Dataset train;  // standardized
  Dataset val;    // standardized
  Dataset test;   // standardized
  Vector test_target_raw;
  std::vector<int> test_rows;  // CSV row ids of the test fold
  std::optional<SyntheticTask> synthetic;
};

/// Train/validation split of a task's own rows plus a fresh test sample of
/// max(n, test_size_min) rows, standardized on the training split.
PreparedData prepare_synthetic(SyntheticTask task, const std::string& task_id, int fold, double val_frac,
                               Eigen::Index test_size_min = 2000);

/// Hierarchy for a structure variant ("marginal", "ms" or "oracle") from the training split only.
InteractionHierarchy estimate_hierarchy(const PreparedData& data, const std::string& variant, const MfcfConfig& mfcf);

/// Builds the model's network (weights uninitialized) for this data.
Network build_model(const ModelSpec& spec, const PreparedData& data, const MfcfConfig& mfcf, std::uint64_t seed);

class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  struct Job {
    std::string task;
    int fold = 0;
    std::size_t model = 0;
    std::uint64_t seed = 0;
  };

  /// Every job implied by the config, in a fixed order.
  std::vector<Job> jobs() const;
  std::vector<std::string> task_ids() const;

  /// Data for one (task, fold); deterministic.
  PreparedData prepare(const std::string& task, int fold) const;

  RunRecord execute(const Job& job) const;

  /// Runs all jobs not already present in output_dir/records.jsonl; returns every record.
  std::vector<RunRecord> run();

  const ExperimentConfig& config() const { return cfg_; }

 private:
  ExperimentConfig cfg_;
  std::map<std::string, Dataset> csv_data_;
  std::map<std::string, SplitPlan> csv_plans_;
};

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

/// Append-only JSON-lines store.
std::vector<RunRecord> load_records(const std::filesystem::path& path);
void append_record(const std::filesystem::path& path, const RunRecord& r);

struct RankTable {
  std::vector<std::string> models;
  std::vector<std::string> tasks;
  std::map<std::string, double> mean_rank;
  std::map<std::string, std::map<std::string, double>> task_rank;     // task -> model -> rank
  std::map<std::string, std::map<std::string, double>> task_mean_r2;  // task -> model -> mean R2 (ok cells only)
  std::map<std::string, std::map<std::string, bool>> failed;          // task -> model -> failed cell
  std::map<std::string, std::pair<std::size_t, std::size_t>> param_range;
};

/// Ranks models per task by mean test R2 (descending, average ranks for
/// ties, failed cells last) and averages ranks over tasks.
RankTable aggregate_ranks(const std::vector<RunRecord>& records);

/// Fractional ranks, 1 = largest value.
std::vector<double> descending_ranks(const std::vector<double>& values);

/// True when, within every (task, fold, seed) group, ordering by R2 matches ordering by test MSE.
bool check_rank_equivalence(const std::vector<RunRecord>& records);

struct CurvePoint {
  std::string model;
  int p = 0;
  long n = 0;
  double mean_r2 = 0.0;
  std::optional<double> sem;
  std::size_t count = 0;
};

std::vector<CurvePoint> r2_curve(const std::vector<RunRecord>& records);

nlohmann::json to_json(const RankTable& t);

/// Writes rank_table.csv, rank_table.json, records.csv and r2_curve.csv into `dir`.
void report(const RankTable& table, const std::vector<RunRecord>& records, const std::filesystem::path& dir);

/// Round-trip shortest representation.
std::string format_number(double v);

}  // namespace homnet
