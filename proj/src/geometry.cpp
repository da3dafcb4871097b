#include "ulca/geometry.hpp"

#include <cmath>
#include <numbers>

#include "ulca/error.hpp"

namespace ulca {
namespace {

void check_confidence(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(Errc::InvalidArgument, "confidence must lie in (0, 1)");
  }
}

ConfidenceEllipse ellipse_from_moments(const Eigen::Vector2d& center, const Eigen::Matrix2d& cov,
                                       double confidence, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double radius = chi2_2dof_radius(confidence);
  ConfidenceEllipse e;
  e.center = center;
  e.confidence = confidence;
  // Eigenvalues ascend; put the major axis first.
  for (int k = 0; k < 2; ++k) {
    const double lambda = std::max(eig.eigenvalues()(1 - k), 0.0);
    const double semi = std::max(radius * std::sqrt(lambda), floor);
    e.axes.col(k) = semi * eig.eigenvectors().col(1 - k);
  }
  e.area = std::numbers::pi * e.semi_axis(0) * e.semi_axis(1);
  return e;
}

}  // namespace

double chi2_2dof_radius(double confidence) {
  check_confidence(confidence);
  return std::sqrt(-2.0 * std::log1p(-confidence));
}

bool ConfidenceEllipse::contains(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d local = axes.colPivHouseholderQr().solve(p - center);
  return local.squaredNorm() <= 1.0;
}

double degenerate_floor(const Eigen::MatrixXd& points) {
  if (points.rows() == 0) return 1e-6;
  const double diag = (points.colwise().maxCoeff() - points.colwise().minCoeff()).norm();
  return 1e-6 * (diag > 0.0 ? diag : 1.0);
}

ConfidenceEllipse confidence_ellipse(const Eigen::MatrixXd& points, double confidence,
                                     std::optional<double> floor) {
  check_confidence(confidence);
  if (points.cols() != 2) throw Error(Errc::DimensionMismatch, "ellipses need 2D points");
  if (points.rows() < 1) throw Error(Errc::EmptyGroup, "ellipse of an empty point set");
  const Eigen::Vector2d center = points.colwise().mean().transpose();
  const Eigen::MatrixXd centered = points.rowwise() - center.transpose();
  const Eigen::Matrix2d cov = centered.transpose() * centered / static_cast<double>(points.rows());
  return ellipse_from_moments(center, cov, confidence, floor.value_or(degenerate_floor(points)));
}

Eigen::VectorXd GroupGeometry::areas() const {
  Eigen::VectorXd a(static_cast<Eigen::Index>(ellipses.size()));
  for (std::size_t j = 0; j < ellipses.size(); ++j) a(static_cast<Eigen::Index>(j)) = ellipses[j].area;
  return a;
}

Eigen::MatrixXd GroupGeometry::centers() const {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(ellipses.size()), 2);
  for (std::size_t j = 0; j < ellipses.size(); ++j) {
    c.row(static_cast<Eigen::Index>(j)) = ellipses[j].center.transpose();
  }
  return c;
}

Eigen::MatrixXd centroid_distances(const Eigen::MatrixXd& centers) {
  const auto c = centers.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i + 1; j < c; ++j) {
      l(i, j) = l(j, i) = (centers.row(i) - centers.row(j)).norm();
    }
  }
  return l;
}

GroupGeometry group_geometry(const Eigen::MatrixXd& Z, std::span<const int> labels, int num_groups,
                             double confidence) {
  check_confidence(confidence);
  if (Z.cols() != 2) throw Error(Errc::DimensionMismatch, "group geometry needs a 2D embedding");
  if (static_cast<Eigen::Index>(labels.size()) != Z.rows()) {
    throw Error(Errc::DimensionMismatch, "label count does not match embedding rows");
  }
  const auto c = static_cast<std::size_t>(num_groups);

  // Single pass over the rows for counts, sums and second moments about the
  // first row of each group (shifted for stability).
  std::vector<int> counts(c, 0);
  std::vector<Eigen::Vector2d> shift(c, Eigen::Vector2d::Zero());
  std::vector<Eigen::Vector2d> sum(c, Eigen::Vector2d::Zero());
  std::vector<Eigen::Matrix2d> sq(c, Eigen::Matrix2d::Zero());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= num_groups) throw Error(Errc::InvalidArgument, "label out of range");
    const auto j = static_cast<std::size_t>(y);
    const Eigen::Vector2d z = Z.row(i).transpose();
    if (counts[j]++ == 0) shift[j] = z;
    const Eigen::Vector2d dz = z - shift[j];
    sum[j] += dz;
    sq[j] += dz * dz.transpose();
  }

  const double floor = degenerate_floor(Z);
  GroupGeometry g;
  g.ellipses.reserve(c);
  for (std::size_t j = 0; j < c; ++j) {
    if (counts[j] == 0) {
      throw Error(Errc::EmptyGroup, "group " + std::to_string(j) + " has no points in the embedding");
    }
    const double m = counts[j];
    const Eigen::Vector2d mean_shifted = sum[j] / m;
    const Eigen::Matrix2d cov = sq[j] / m - mean_shifted * mean_shifted.transpose();
    g.ellipses.push_back(ellipse_from_moments(shift[j] + mean_shifted, cov, confidence, floor));
  }
  g.distances = centroid_distances(g.centers());
  return g;
}

}  // namespace ulca
