#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace homnet {

using Matrix = Eigen::MatrixXd;  // column-major; rows are samples
using Vector = Eigen::VectorXd;

/// Tabular regression data. Rows are samples.
struct Dataset {
  Matrix features;  // n x p
  Vector target;    // n
  std::vector<std::string> feature_names;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index p() const { return features.cols(); }

  /// Rows picked by index, in the given order.
  Dataset subset(std::span<const int> rows) const;

  /// Throws ConfigError on shape mismatch, n < 2, p < 2 or non-finite values.
  void validate() const;
};

/// Column name or zero-based column index.
using ColumnRef = std::variant<std::string, int>;

Dataset load_csv(const std::filesystem::path& path, const ColumnRef& target_column);

/// Writes features then the target as the last column, full round-trip precision.
void save_csv(const Dataset& data, const std::filesystem::path& path,
              const std::string& target_name = "y");

/// One integer per line, no header.
std::vector<int> load_fold_file(const std::filesystem::path& path, Eigen::Index expected_rows);

/// Per-column standardization. Population std; constant columns get std 1.
struct Scaler {
  Vector feature_mean;
  Vector feature_std;
  double target_mean = 0.0;
  double target_std = 1.0;

  Dataset apply(const Dataset& data) const;
  /// Maps standardized targets back to the original scale.
  Vector invert_target(const Vector& standardized) const;
  Matrix invert_features(const Matrix& standardized) const;
};

Scaler fit_scaler(const Dataset& train);
inline Dataset apply_scaler(const Scaler& scaler, const Dataset& data) { return scaler.apply(data); }

/// Fold assignment for k-fold cross validation plus a validation hold-out
/// drawn from each fold's training portion.
struct SplitPlan {
  std::vector<int> fold_of_row;  // length n, values in [0, k)
  int k_folds = 0;
  double val_frac = 0.2;
  std::uint64_t seed = 0;

  struct FoldRows {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
  };

  /// Deterministic in (plan, fold). Row lists are sorted ascending.
  FoldRows rows_for(int fold) const;
};

SplitPlan make_splits(Eigen::Index n, int k_folds, double val_frac, std::uint64_t seed);

/// Wraps externally supplied fold ids (e.g. exported CV splits).
SplitPlan splits_from_folds(std::vector<int> fold_of_row, double val_frac, std::uint64_t seed);

/// Seeded train/validation split of an index range; validation gets
/// round(val_frac * size) rows, clamped to [1, size - 1].
void holdout_split(std::span<const int> rows, double val_frac, std::uint64_t seed,
                   std::vector<int>& train, std::vector<int>& val);

}  // namespace homnet
