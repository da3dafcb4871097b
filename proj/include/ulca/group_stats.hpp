#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ulca/dataset.hpp"

namespace ulca {

/// Per-group moments of a labeled dataset. Computed once per dataset and
/// shared read-only by every solve.
struct GroupStats {
  Eigen::VectorXd mu;                     // global mean, d
  Eigen::MatrixXd mu_j;                   // group means, c x d
  std::vector<int> n_j;                   // group sizes
  std::vector<Eigen::MatrixXd> C_wi;      // within-group covariance (divisor n_j)
  std::vector<Eigen::MatrixXd> C_bw;      // (mu_j - mu)(mu_j - mu)^T

  int num_groups() const { return static_cast<int>(n_j.size()); }
  Eigen::Index dim() const { return mu.size(); }
  int total_count() const;

  /// Largest absolute entry over every C_wi and C_bw (1 when all are zero).
  double scale() const;
};

GroupStats compute_group_stats(const Dataset& data);

}  // namespace ulca
