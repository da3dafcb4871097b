#include <numbers>
#include <random>

#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ulca/error.hpp"
#include "ulca/geometry.hpp"
#include "ulca/ulca_model.hpp"

using namespace ulca;

namespace {

Eigen::Vector2d boundary_point(const ConfidenceEllipse& e, double t) {
  return e.center + e.axes * Eigen::Vector2d(std::cos(t), std::sin(t));
}

bool overlap(const ConfidenceEllipse& a, const ConfidenceEllipse& b) {
  if (a.contains(b.center) || b.contains(a.center)) return true;
  for (int k = 0; k < 720; ++k) {
    const double t = 2.0 * std::numbers::pi * k / 720.0;
    if (b.contains(boundary_point(a, t)) || a.contains(boundary_point(b, t))) return true;
  }
  return false;
}

double mean_radius(const Eigen::MatrixXd& Z, std::span<const int> labels, int g, const Eigen::Vector2d& c) {
  double sum = 0.0;
  int m = 0;
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    if (labels[static_cast<std::size_t>(i)] != g) continue;
    sum += (Z.row(i).transpose() - c).norm();
    ++m;
  }
  return sum / m;
}

}  // namespace

TEST_CASE("standard normal cloud at 50 percent") {
  std::mt19937_64 rng(51);
  const Eigen::MatrixXd P = oracle::gaussian(10000, 2, rng);
  const auto e = confidence_ellipse(P, 0.5);
  const double expected = std::sqrt(-2.0 * std::log(0.5));
  CHECK(expected == doctest::Approx(1.1774).epsilon(1e-4));
  CHECK(std::abs(e.semi_axis(0) - expected) < 0.05);
  CHECK(std::abs(e.semi_axis(1) - expected) < 0.05);
  CHECK(e.semi_axis(0) >= e.semi_axis(1));
  int inside = 0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) inside += e.contains(P.row(i).transpose());
  CHECK(std::abs(inside / 10000.0 - 0.5) <= 0.05);
  CHECK(e.area == doctest::Approx(std::numbers::pi * e.semi_axis(0) * e.semi_axis(1)));
}

TEST_CASE("identical points get floor semi-axes") {
  const Eigen::MatrixXd P = Eigen::RowVector2d(3, -1).replicate(20, 1);
  const auto e = confidence_ellipse(P, 0.5);
  CHECK(e.center.isApprox(Eigen::Vector2d(3, -1)));
  CHECK(e.semi_axis(0) == doctest::Approx(1e-6));
  CHECK(e.semi_axis(1) == doctest::Approx(1e-6));
  CHECK(e.area > 0.0);
}

TEST_CASE("collinear points get one floored semi-axis") {
  Eigen::MatrixXd P(11, 2);
  for (int i = 0; i <= 10; ++i) P.row(i) = Eigen::RowVector2d(i, 2.0 * i);
  const auto e = confidence_ellipse(P, 0.5);
  const double floor = degenerate_floor(P);
  CHECK(floor == doctest::Approx(1e-6 * std::sqrt(500.0)));
  CHECK(e.semi_axis(0) > 1.0);
  CHECK(e.semi_axis(1) == doctest::Approx(floor));
}

TEST_CASE("mirrored groups are two apart") {
  Eigen::MatrixXd Z(4, 2);
  Z << -1, 0.5, -1, -0.5, 1, 0.5, 1, -0.5;
  const std::vector<int> labels{0, 0, 1, 1};
  const auto g = group_geometry(Z, labels, 2);
  CHECK(g.distances(0, 1) == doctest::Approx(2.0));
  CHECK(g.distances(1, 0) == doctest::Approx(2.0));
  CHECK(g.distances(0, 0) == 0.0);
}

TEST_CASE("translated copies have equal areas") {
  std::mt19937_64 rng(52);
  const Eigen::MatrixXd A = oracle::gaussian(50, 2, rng);
  const Eigen::RowVector2d t(3, 4);
  Eigen::MatrixXd Z(100, 2);
  Z << A, A.rowwise() + t;
  std::vector<int> labels(100, 0);
  std::fill(labels.begin() + 50, labels.end(), 1);
  const auto g = group_geometry(Z, labels, 2);
  CHECK(g.ellipses[0].area == doctest::Approx(g.ellipses[1].area).epsilon(1e-12));
  CHECK(g.distances(0, 1) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("group geometry matches per-group ellipses") {
  std::mt19937_64 rng(53);
  const auto data = oracle::random_dataset(300, 2, 3, rng, 100.0);
  const auto g = group_geometry(data.X, data.labels, 3);
  const double floor = degenerate_floor(data.X);
  for (int j = 0; j < 3; ++j) {
    const auto e = confidence_ellipse(oracle::rows_of_group(data, j), 0.5, floor);
    CHECK((e.center - g.ellipses[j].center).norm() < 1e-9);
    CHECK(e.area == doctest::Approx(g.ellipses[j].area).epsilon(1e-9));
  }
}

TEST_CASE("geometry argument checks") {
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(3, 2);
  const std::vector<int> labels{0, 0, 0};
  CHECK_THROWS_AS((void)group_geometry(Z, labels, 2), Error);
  CHECK_THROWS_AS((void)group_geometry(Z, labels, 1, 1.0), Error);
  CHECK_THROWS_AS((void)confidence_ellipse(Eigen::MatrixXd::Zero(3, 3), 0.5), Error);
  CHECK_THROWS_AS((void)chi2_2dof_radius(0.0), Error);
}

TEST_CASE("Wine LDA ellipses are disjoint and well separated") {
  const auto& wine = fixture::wine();
  const auto f = fit(wine, presets::lda(3), {});
  const auto g = group_geometry(f.embedding, wine.labels, 3);
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      CHECK_FALSE(overlap(g.ellipses[a], g.ellipses[b]));
      const double ra = mean_radius(f.embedding, wine.labels, a, g.ellipses[a].center);
      const double rb = mean_radius(f.embedding, wine.labels, b, g.ellipses[b].center);
      CHECK(g.distances(a, b) > std::max(ra, rb));
    }
  }
}

TEST_SUITE("invariants") {
  TEST_CASE("rigid motions preserve distances and areas") {
    std::mt19937_64 rng(54);
    for (int trial = 0; trial < 20; ++trial) {
      const auto data = oracle::random_dataset(200, 2, 4, rng);
      const auto before = group_geometry(data.X, data.labels, 4);
      const Eigen::MatrixXd Q = oracle::random_orthonormal(2, 2, rng);
      const Eigen::RowVector2d t = 10.0 * oracle::gaussian(1, 2, rng);
      const Eigen::MatrixXd moved = (data.X * Q).rowwise() + t;
      const auto after = group_geometry(moved, data.labels, 4);
      for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(after.ellipses[j].area - before.ellipses[j].area) <= 1e-9 * before.ellipses[j].area);
      }
      CHECK((after.distances - before.distances).cwiseAbs().maxCoeff() <=
            1e-9 * before.distances.maxCoeff());
    }
  }

  TEST_CASE("uniform scaling scales distances and areas") {
    std::mt19937_64 rng(55);
    const auto data = oracle::random_dataset(200, 2, 3, rng);
    const auto before = group_geometry(data.X, data.labels, 3);
    for (double s : {0.01, 0.5, 3.0, 1000.0}) {
      const auto after = group_geometry(s * data.X, data.labels, 3);
      CHECK((after.distances - s * before.distances).cwiseAbs().maxCoeff() <=
            1e-9 * s * before.distances.maxCoeff());
      for (int j = 0; j < 3; ++j) {
        CHECK(after.ellipses[j].area == doctest::Approx(s * s * before.ellipses[j].area).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("ellipse containment is calibrated") {
    std::mt19937_64 rng(56);
    for (double conf : {0.5, 0.9}) {
      for (int trial = 0; trial < 3; ++trial) {
        Eigen::Matrix2d L = oracle::gaussian(2, 2, rng);
        const Eigen::MatrixXd P = oracle::gaussian(10000, 2, rng) * L;
        const auto e = confidence_ellipse(P, conf);
        int inside = 0;
        for (Eigen::Index i = 0; i < P.rows(); ++i) inside += e.contains(P.row(i).transpose());
        CHECK(std::abs(inside / 10000.0 - conf) <= 0.05);
      }
    }
  }
}
