#include "homnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "homnet/error.hpp"
#include "homnet/rng.hpp"

namespace homnet {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '"')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset Dataset::subset(std::span<const int> rows) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), p());
  out.target.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.features.row(r) = features.row(rows[i]);
    out.target(r) = target(rows[i]);
  }
  out.feature_names = feature_names;
  return out;
}

void Dataset::validate() const {
  if (target.size() != features.rows())
    throw ConfigError("dataset: target length " + std::to_string(target.size()) +
                      " does not match " + std::to_string(features.rows()) + " feature rows");
  if (n() < 2) throw ConfigError("dataset: need at least 2 rows");
  if (p() < 2) throw ConfigError("dataset: need at least 2 feature columns");
  if (!features.allFinite() || !target.allFinite())
    throw ConfigError("dataset: non-finite values present");
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != p())
    throw ConfigError("dataset: feature_names length does not match p");
}

Dataset load_csv(const std::filesystem::path& path, const ColumnRef& target_column) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("CSV file is empty: " + path.string());
  const auto header = split_row(line);
  const auto width = header.size();

  std::size_t target_idx = width;
  if (const auto* name = std::get_if<std::string>(&target_column)) {
    const auto it = std::find(header.begin(), header.end(), *name);
    if (it == header.end()) throw ConfigError("target column '" + *name + "' not found in " + path.string());
    target_idx = static_cast<std::size_t>(it - header.begin());
  } else {
    const int idx = std::get<int>(target_column);
    if (idx < 0 || static_cast<std::size_t>(idx) >= width)
      throw ConfigError("target column index " + std::to_string(idx) + " out of range");
    target_idx = static_cast<std::size_t>(idx);
  }

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != width)
      throw ConfigError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                        " cells, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < width; ++c) {
      double v;
      if (!parse_double(cells[c], v))
        throw ConfigError("CSV line " + std::to_string(line_no) + " (data row " + std::to_string(rows + 1) +
                          "), column " + std::to_string(c + 1) +
                          " ('" + header[c] + "'): " +
                          (cells[c].empty() ? "missing value" : "non-numeric value '" + cells[c] + "'"));
      values.push_back(v);
    }
    ++rows;
  }

  Dataset data;
  const auto n = static_cast<Eigen::Index>(rows);
  const auto p = static_cast<Eigen::Index>(width - 1);
  data.features.resize(n, p);
  data.target.resize(n);
  for (std::size_t c = 0; c < width; ++c)
    if (c != target_idx) data.feature_names.push_back(header[c]);
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::Index fc = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const double v = values[static_cast<std::size_t>(r) * width + c];
      if (c == target_idx)
        data.target(r) = v;
      else
        data.features(r, fc++) = v;
    }
  }
  data.validate();
  return data;
}

void save_csv(const Dataset& data, const std::filesystem::path& path, const std::string& target_name) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write CSV file: " + path.string());
  for (Eigen::Index c = 0; c < data.p(); ++c) {
    out << (data.feature_names.empty() ? "x" + std::to_string(c)
                                       : data.feature_names[static_cast<std::size_t>(c)])
        << ',';
  }
  out << target_name << '\n';
  for (Eigen::Index r = 0; r < data.n(); ++r) {
    for (Eigen::Index c = 0; c < data.p(); ++c) out << format_double(data.features(r, c)) << ',';
    out << format_double(data.target(r)) << '\n';
  }
}

std::vector<int> load_fold_file(const std::filesystem::path& path, Eigen::Index expected_rows) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fold file: " + path.string());
  std::vector<int> folds;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    int v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || v < 0)
      throw ConfigError("fold file " + path.string() + ": bad fold id '" + t + "' on line " +
                        std::to_string(folds.size() + 1));
    folds.push_back(v);
  }
  if (static_cast<Eigen::Index>(folds.size()) != expected_rows)
    throw ConfigError("fold file has " + std::to_string(folds.size()) + " entries, dataset has " +
                      std::to_string(expected_rows) + " rows");
  return folds;
}

namespace {

void column_stats(const Eigen::Ref<const Vector>& col, double& mean, double& std) {
  const auto n = static_cast<double>(col.size());
  mean = col.sum() / n;
  const double var = (col.array() - mean).square().sum() / n;
  std = var > 0.0 ? std::sqrt(var) : 1.0;
  // A column with all-equal entries can still show a tiny variance from
  // rounding in the mean; treat it as constant.
  if (col.maxCoeff() == col.minCoeff()) std = 1.0;
}

}  // namespace

Scaler fit_scaler(const Dataset& train) {
  if (train.n() < 1) throw ConfigError("fit_scaler: empty training set");
  Scaler s;
  s.feature_mean.resize(train.p());
  s.feature_std.resize(train.p());
  for (Eigen::Index c = 0; c < train.p(); ++c)
    column_stats(train.features.col(c), s.feature_mean(c), s.feature_std(c));
  column_stats(train.target, s.target_mean, s.target_std);
  return s;
}

Dataset Scaler::apply(const Dataset& data) const {
  if (data.p() != feature_mean.size())
    throw ConfigError("scaler width " + std::to_string(feature_mean.size()) + " does not match data width " +
                      std::to_string(data.p()));
  Dataset out;
  out.feature_names = data.feature_names;
  out.features = (data.features.rowwise() - feature_mean.transpose()).array().rowwise() /
                 feature_std.transpose().array();
  out.target = (data.target.array() - target_mean) / target_std;
  return out;
}

Vector Scaler::invert_target(const Vector& standardized) const {
  return (standardized.array() * target_std + target_mean).matrix();
}

Matrix Scaler::invert_features(const Matrix& standardized) const {
  return (standardized.array().rowwise() * feature_std.transpose().array()).rowwise() +
         feature_mean.transpose().array();
}

SplitPlan make_splits(Eigen::Index n, int k_folds, double val_frac, std::uint64_t seed) {
  if (k_folds < 2) throw ConfigError("make_splits: k_folds must be at least 2");
  if (!(val_frac > 0.0 && val_frac < 1.0)) throw ConfigError("make_splits: val_frac must lie in (0, 1)");
  if (n < k_folds) throw ConfigError("make_splits: n=" + std::to_string(n) + " is smaller than k_folds");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).split("folds");
  rng.shuffle(order);

  SplitPlan plan;
  plan.k_folds = k_folds;
  plan.val_frac = val_frac;
  plan.seed = seed;
  plan.fold_of_row.assign(static_cast<std::size_t>(n), 0);
  // Position i in the shuffled order goes to fold i mod k: sizes differ by at most 1.
  for (std::size_t i = 0; i < order.size(); ++i)
    plan.fold_of_row[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(k_folds));
  return plan;
}

SplitPlan splits_from_folds(std::vector<int> fold_of_row, double val_frac, std::uint64_t seed) {
  if (fold_of_row.empty()) throw ConfigError("fold assignment is empty");
  if (!(val_frac > 0.0 && val_frac < 1.0)) throw ConfigError("val_frac must lie in (0, 1)");
  SplitPlan plan;
  plan.k_folds = *std::max_element(fold_of_row.begin(), fold_of_row.end()) + 1;
  plan.fold_of_row = std::move(fold_of_row);
  plan.val_frac = val_frac;
  plan.seed = seed;
  return plan;
}

void holdout_split(std::span<const int> rows, double val_frac, std::uint64_t seed, std::vector<int>& train,
                   std::vector<int>& val) {
  std::vector<int> order(rows.begin(), rows.end());
  Rng rng = Rng(seed).split("holdout");
  rng.shuffle(order);
  const auto size = static_cast<long>(order.size());
  long n_val = std::lround(val_frac * static_cast<double>(size));
  n_val = std::clamp(n_val, 1L, std::max(1L, size - 1));
  val.assign(order.begin(), order.begin() + n_val);
  train.assign(order.begin() + n_val, order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
}

SplitPlan::FoldRows SplitPlan::rows_for(int fold) const {
  if (fold < 0 || fold >= k_folds) throw ConfigError("fold index " + std::to_string(fold) + " out of range");
  FoldRows out;
  std::vector<int> train_all;
  for (std::size_t r = 0; r < fold_of_row.size(); ++r) {
    if (fold_of_row[r] == fold)
      out.test.push_back(static_cast<int>(r));
    else
      train_all.push_back(static_cast<int>(r));
  }
  if (train_all.size() < 2) throw ConfigError("fold " + std::to_string(fold) + " leaves fewer than 2 training rows");
  holdout_split(train_all, val_frac, Rng(seed).split(static_cast<std::uint64_t>(fold)).seed(), out.train, out.val);
  return out;
}

}  // namespace homnet
