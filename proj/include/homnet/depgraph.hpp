#pragma once

#include <filesystem>

#include "homnet/data.hpp"

namespace homnet {

/// Symmetric p x p matrix of pairwise dependence strengths in [0, 1].
/// The diagonal is 1 and is never read by the structure learner.
struct DependencyMatrix {
  Matrix values;

  Eigen::Index p() const { return values.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values(i, j); }
};

/// Squared Pearson correlations. Pairs involving a constant column get 0.
DependencyMatrix marginal_dependency(const Matrix& features);

struct MedianSplitDependency {
  DependencyMatrix low;
  DependencyMatrix high;
  Eigen::Index low_rows = 0;
  Eigen::Index high_rows = 0;
};

/// Splits rows at the empirical median of the target (ties go low) and
/// estimates marginal dependence on each half separately.
MedianSplitDependency median_split_dependency(const Matrix& features, const Vector& target);

/// Empirical median; mean of the two middle values for even n.
double empirical_median(const Vector& values);

/// p rows x p columns, no header.
void save_matrix_csv(const Matrix& m, const std::filesystem::path& path);

}  // namespace homnet
