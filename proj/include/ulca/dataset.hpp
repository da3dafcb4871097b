#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ulca {

/// Labeled data matrix. Rows are observations; labels are 0-based group indices.
struct Dataset {
  Eigen::MatrixXd X;
  std::vector<int> labels;
  std::vector<std::string> attribute_names;
  std::vector<std::string> group_names;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
  int num_groups() const { return static_cast<int>(group_names.size()); }

  /// Throws ulca::Error when n < 2, d < 2, a label is out of range, a group is
  /// empty, the name lists are inconsistent, or X holds a non-finite value.
  void validate() const;

  /// FNV-1a over the raw values and labels; identifies content, not formatting.
  std::uint64_t content_hash() const;
};

/// Z-score every attribute (population standard deviation). Constant columns
/// are centered only.
Dataset standardize(const Dataset& data);

std::vector<int> group_counts(const std::vector<int>& labels, int num_groups);

}  // namespace ulca
