#include <random>

#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ulca/error.hpp"
#include "ulca/group_stats.hpp"
#include "ulca/kernels.hpp"

using ulca::Dataset;

namespace {

Dataset make(Eigen::MatrixXd X, std::vector<int> labels, int c) {
  Dataset d;
  d.X = std::move(X);
  d.labels = std::move(labels);
  for (Eigen::Index a = 0; a < d.X.cols(); ++a) d.attribute_names.push_back("a" + std::to_string(a));
  for (int j = 0; j < c; ++j) d.group_names.push_back(std::to_string(j));
  return d;
}

/// sum_j (n_j/n) (C_wi_j + C_bw_j)
Eigen::MatrixXd total_from_groups(const ulca::GroupStats& s) {
  const double n = s.total_count();
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(s.dim(), s.dim());
  for (int j = 0; j < s.num_groups(); ++j) T += (s.n_j[j] / n) * (s.C_wi[j] + s.C_bw[j]);
  return T;
}

}  // namespace

TEST_CASE("two symmetric points give a rank-one covariance") {
  Eigen::MatrixXd X(3, 2);
  X << 0, 0, 2, 0, 5, 5;
  const auto s = ulca::compute_group_stats(make(X, {0, 0, 1}, 2));
  CHECK(s.mu_j(0, 0) == doctest::Approx(1.0));
  CHECK(s.mu_j(0, 1) == doctest::Approx(0.0));
  Eigen::Matrix2d expected;
  expected << 1, 0, 0, 0;
  CHECK((s.C_wi[0] - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(s.n_j[0] == 2);
}

TEST_CASE("singleton groups have equal between-group terms") {
  Eigen::MatrixXd X(2, 2);
  X << 0, 0, 2, 0;
  const auto s = ulca::compute_group_stats(make(X, {0, 1}, 2));
  CHECK(s.mu(0) == doctest::Approx(1.0));
  CHECK(s.mu(1) == doctest::Approx(0.0));
  Eigen::Matrix2d expected;
  expected << 1, 0, 0, 0;
  CHECK((s.C_bw[0] - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((s.C_bw[1] - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(s.C_wi[0].isZero(0.0));
}

TEST_CASE("Wine obeys the law of total covariance") {
  const auto& wine = fixture::wine();
  REQUIRE(wine.rows() == 178);
  REQUIRE(wine.cols() == 13);
  REQUIRE(wine.num_groups() == 3);
  const auto s = ulca::compute_group_stats(wine);
  const Eigen::MatrixXd direct = oracle::naive_covariance(wine.X);
  CHECK((total_from_groups(s) - direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("group covariances match the two-pass formula") {
  std::mt19937_64 rng(11);
  const auto data = oracle::random_dataset(240, 6, 4, rng);
  const auto s = ulca::compute_group_stats(data);
  for (int j = 0; j < 4; ++j) {
    const Eigen::MatrixXd ref = oracle::naive_covariance(oracle::rows_of_group(data, j));
    CHECK((s.C_wi[j] - ref).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("empty group is rejected") {
  Eigen::MatrixXd X(3, 2);
  X << 0, 0, 1, 1, 2, 2;
  const auto data = make(X, {0, 0, 0}, 2);
  try {
    (void)ulca::compute_group_stats(data);
    FAIL("expected an error");
  } catch (const ulca::Error& e) {
    CHECK(e.code() == ulca::Errc::EmptyGroup);
  }
}

TEST_CASE("non-finite values are rejected") {
  Eigen::MatrixXd X(3, 2);
  X << 0, 0, 1, std::numeric_limits<double>::quiet_NaN(), 2, 2;
  CHECK_THROWS_AS((void)ulca::compute_group_stats(make(X, {0, 1, 1}, 2)), ulca::Error);
}

TEST_SUITE("invariants") {
  TEST_CASE("group statistics are translation invariant") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      auto data = oracle::random_dataset(150, 5, 3, rng);
      const auto before = ulca::compute_group_stats(data);
      const Eigen::RowVectorXd shift = 10.0 * oracle::gaussian(1, 5, rng);
      data.X.rowwise() += shift;
      const auto after = ulca::compute_group_stats(data);
      for (int j = 0; j < 3; ++j) {
        CHECK((before.C_wi[j] - after.C_wi[j]).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((before.C_bw[j] - after.C_bw[j]).cwiseAbs().maxCoeff() < 1e-10);
      }
    }
  }

  TEST_CASE("per-attribute scaling scales covariance entries") {
    std::mt19937_64 rng(4);
    auto data = oracle::random_dataset(120, 4, 2, rng);
    const auto before = ulca::compute_group_stats(data);
    Eigen::VectorXd s(4);
    s << 0.5, 2.0, -3.0, 7.0;
    data.X = data.X * s.asDiagonal();
    const auto after = ulca::compute_group_stats(data);
    const Eigen::MatrixXd S = s * s.transpose();
    for (int j = 0; j < 2; ++j) {
      CHECK((after.C_wi[j] - before.C_wi[j].cwiseProduct(S)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((after.C_bw[j] - before.C_bw[j].cwiseProduct(S)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("law of total covariance holds on random data") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const auto data = oracle::random_dataset(90 + trial, 7, 2 + trial % 4, rng);
      const auto s = ulca::compute_group_stats(data);
      CHECK((total_from_groups(s) - oracle::naive_covariance(data.X)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("parallel kernels agree with their serial references") {
    std::mt19937_64 rng(6);
    for (const auto [n, d] : {std::pair{50, 3}, std::pair{5000, 20}, std::pair{20001, 7}}) {
      const auto data = oracle::random_dataset(n, d, 3, rng);
      const auto par = ulca::kernels::group_moments(data.X, data.labels, 3);
      const auto ser = ulca::kernels::group_moments_serial(data.X, data.labels, 3);
      CHECK(par.counts == ser.counts);
      CHECK((par.means - ser.means).cwiseAbs().maxCoeff() < 1e-12);
      for (int j = 0; j < 3; ++j) {
        const double scale = std::max(1.0, ser.covariances[j].cwiseAbs().maxCoeff());
        CHECK((par.covariances[j] - ser.covariances[j]).cwiseAbs().maxCoeff() < 1e-12 * scale);
      }
      const Eigen::MatrixXd M = oracle::random_orthonormal(d, 2, rng);
      const Eigen::MatrixXd Zp = ulca::kernels::project(data.X, M);
      const Eigen::MatrixXd Zs = ulca::kernels::project_serial(data.X, M);
      CHECK((Zp - Zs).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, Zs.cwiseAbs().maxCoeff()));
    }
  }
}
