#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ulca {

inline constexpr double kDefaultConfidence = 0.5;

/// Gaussian confidence ellipse of a 2D point cloud.
struct ConfidenceEllipse {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  /// Columns are the principal directions scaled by their semi-axis lengths,
  /// major axis first.
  Eigen::Matrix2d axes = Eigen::Matrix2d::Zero();
  double confidence = kDefaultConfidence;
  double area = 0.0;

  double semi_axis(int k) const { return axes.col(k).norm(); }
  bool contains(const Eigen::Vector2d& p) const;
};

/// Radius multiplier sqrt(-2 ln(1 - confidence)), the chi-square(2) quantile root.
double chi2_2dof_radius(double confidence);

/// Semi-axis floor used for degenerate clouds: 1e-6 of the bounding-box
/// diagonal, or 1e-6 when that diagonal is zero.
double degenerate_floor(const Eigen::MatrixXd& points);

/// Ellipse from the population covariance of the rows of `points` (m x 2).
/// `floor` defaults to degenerate_floor(points).
ConfidenceEllipse confidence_ellipse(const Eigen::MatrixXd& points, double confidence,
                                     std::optional<double> floor = std::nullopt);

struct GroupGeometry {
  std::vector<ConfidenceEllipse> ellipses;
  Eigen::MatrixXd distances;  // c x c centroid distances

  Eigen::VectorXd areas() const;
  Eigen::MatrixXd centers() const;  // c x 2
};

/// Pairwise Euclidean distances between the rows of `centers`.
Eigen::MatrixXd centroid_distances(const Eigen::MatrixXd& centers);

GroupGeometry group_geometry(const Eigen::MatrixXd& Z, std::span<const int> labels, int num_groups,
                             double confidence = kDefaultConfidence);

}  // namespace ulca
