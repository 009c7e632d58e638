#include "homnet/depgraph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "homnet/error.hpp"

namespace homnet {

DependencyMatrix marginal_dependency(const Matrix& features) {
  const auto n = features.rows();
  const auto p = features.cols();
  if (n < 2) throw ConfigError("marginal_dependency: need at least 2 rows");

  // Standardize first; Pearson r is then the mean cross product.
  Matrix z(n, p);
  std::vector<bool> constant(static_cast<std::size_t>(p), false);
  for (Eigen::Index c = 0; c < p; ++c) {
    const auto col = features.col(c);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / static_cast<double>(n);
    if (var <= 0.0 || col.maxCoeff() == col.minCoeff()) {
      constant[static_cast<std::size_t>(c)] = true;
      z.col(c).setZero();
    } else {
      z.col(c) = (col.array() - mean) / std::sqrt(var);
    }
  }

  DependencyMatrix m;
  m.values = Matrix::Identity(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      double r = 0.0;
      if (!constant[static_cast<std::size_t>(i)] && !constant[static_cast<std::size_t>(j)]) {
        r = z.col(i).dot(z.col(j)) / static_cast<double>(n);
        r = std::clamp(r, -1.0, 1.0);
      }
      m.values(i, j) = m.values(j, i) = r * r;
    }
  }
  return m;
}

double empirical_median(const Vector& values) {
  if (values.size() == 0) throw ConfigError("median of an empty vector");
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MedianSplitDependency median_split_dependency(const Matrix& features, const Vector& target) {
  if (features.rows() != target.size()) throw ConfigError("median_split_dependency: row count mismatch");
  const double median = empirical_median(target);
  std::vector<Eigen::Index> low, high;
  for (Eigen::Index r = 0; r < target.size(); ++r) (target(r) <= median ? low : high).push_back(r);
  if (low.size() < 2 || high.size() < 2)
    throw ConfigError("median split leaves a half with fewer than 2 rows (low=" + std::to_string(low.size()) +
                      ", high=" + std::to_string(high.size()) + ")");

  MedianSplitDependency out;
  out.low = marginal_dependency(features(low, Eigen::all));
  out.high = marginal_dependency(features(high, Eigen::all));
  out.low_rows = static_cast<Eigen::Index>(low.size());
  out.high_rows = static_cast<Eigen::Index>(high.size());
  return out;
}

void save_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      if (j) out << ',';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

}  // namespace homnet
