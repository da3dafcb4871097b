#pragma once

// Data-parallel kernels behind group statistics and embedding.
//
// Each kernel has an OpenMP implementation and a plain-loop serial reference.
// The parallel versions split rows into a fixed number of chunks that does not
// depend on the thread count, and reduce partial results in chunk order, so
// their output is bit-identical for any OMP_NUM_THREADS. The serial references
// exist for tests and the benchmark target only.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ulca::kernels {

/// Per-group first and second moments: means (c x d), counts, and the
/// within-group scatter divided by the group size (population covariance).
struct GroupMoments {
  Eigen::MatrixXd means;
  std::vector<int> counts;
  std::vector<Eigen::MatrixXd> covariances;
};

GroupMoments group_moments(const Eigen::MatrixXd& X, std::span<const int> labels, int num_groups);
GroupMoments group_moments_serial(const Eigen::MatrixXd& X, std::span<const int> labels,
                                  int num_groups);

/// Z = X * M.
Eigen::MatrixXd project(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M);
Eigen::MatrixXd project_serial(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M);

/// Number of threads OpenMP would use for a parallel region (1 without OpenMP).
int max_threads();

}  // namespace ulca::kernels
