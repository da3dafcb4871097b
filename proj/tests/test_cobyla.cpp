#include <random>

#include <doctest.h>

#include "ulca/cobyla.hpp"

using namespace ulca;

namespace {

const Eigen::VectorXd kLower = Eigen::VectorXd::Zero(7);
const Eigen::VectorXd kUpper = Eigen::VectorXd::Ones(7);

}  // namespace

TEST_CASE("interior quadratic converges") {
  Eigen::VectorXd target(7);
  target << 0.3, 0.7, 0.45, 0.2, 0.8, 0.55, 0.6;
  const auto f = [&](const Eigen::VectorXd& x) { return (x - target).squaredNorm(); };
  const auto r = cobyla_minimize(f, Eigen::VectorXd::Constant(7, 0.5), kLower, kUpper,
                                 CobylaConfig{0.25, 1e-4, 200});
  CHECK(r.evaluations <= 200);
  CHECK((r.x - target).cwiseAbs().maxCoeff() < 1e-2);
  CHECK(r.f <= r.f_init);
}

TEST_CASE("constant objective returns the start") {
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(7, 0.4);
  const auto r = cobyla_minimize([](const Eigen::VectorXd&) { return 3.0; }, x0, kLower, kUpper,
                                 CobylaConfig{0.25, 1e-4, 50});
  CHECK(r.x == x0);
  CHECK(r.f == 3.0);
  CHECK(r.f_init == 3.0);
}

TEST_CASE("boundary optimum stays feasible") {
  Eigen::VectorXd target = Eigen::VectorXd::Constant(7, 0.5);
  target(0) = -0.4;
  target(3) = -0.2;
  std::vector<Eigen::VectorXd> seen;
  const auto f = [&](const Eigen::VectorXd& x) {
    seen.push_back(x);
    return (x - target).squaredNorm();
  };
  const auto r = cobyla_minimize(f, Eigen::VectorXd::Constant(7, 0.5), kLower, kUpper,
                                 CobylaConfig{0.25, 1e-4, 200});
  CHECK(r.x(0) >= 0.0);
  CHECK(r.x(0) < 1e-2);
  CHECK(r.x(3) >= 0.0);
  CHECK(r.x(3) < 1e-2);
  for (const auto& x : seen) CHECK((x.array() >= 0.0).all());
}

TEST_CASE("cancellation stops the search") {
  std::atomic<bool> cancel{false};
  int calls = 0;
  const auto f = [&](const Eigen::VectorXd& x) {
    if (++calls == 5) cancel = true;
    return x.squaredNorm();
  };
  const auto r = cobyla_minimize(f, Eigen::VectorXd::Constant(7, 0.5), kLower, kUpper,
                                 CobylaConfig{0.25, 1e-4, 200}, &cancel);
  CHECK(r.cancelled);
  CHECK(r.evaluations <= 6);
}

TEST_CASE("progress reports every evaluation") {
  int last = 0;
  double best = 1e300;
  bool monotone = true;
  const auto progress = [&](int evals, double f) {
    monotone = monotone && evals == last + 1 && f <= best;
    last = evals;
    best = f;
  };
  const auto r = cobyla_minimize([](const Eigen::VectorXd& x) { return x.sum(); },
                                 Eigen::VectorXd::Constant(7, 0.5), kLower, kUpper,
                                 CobylaConfig{0.25, 1e-4, 60}, nullptr, progress);
  CHECK(monotone);
  CHECK(last == r.evaluations);
}

TEST_SUITE("invariants") {
  TEST_CASE("evaluations stay inside the box and the incumbent never worsens") {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 40; ++trial) {
      const int n = 2 + trial % 8;
      Eigen::VectorXd lo(n), hi(n), x0(n), center(n);
      for (int i = 0; i < n; ++i) {
        lo(i) = -u(rng);
        hi(i) = u(rng);
        x0(i) = lo(i) + u(rng) * (hi(i) - lo(i));
        center(i) = 3.0 * normal(rng);
      }
      bool inside = true;
      const auto f = [&](const Eigen::VectorXd& x) {
        inside = inside && (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
        return (x - center).squaredNorm() + std::sin(5.0 * x.sum());
      };
      const auto r = cobyla_minimize(f, x0, lo, hi, CobylaConfig{0.3, 1e-4, 80});
      CHECK(inside);
      CHECK(r.f <= r.f_init);
      for (std::size_t t = 1; t < r.trace.size(); ++t) CHECK(r.trace[t].f <= r.trace[t - 1].f);
    }
  }
}
