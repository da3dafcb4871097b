#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "ulca/backward_select.hpp"
#include "ulca/error.hpp"
#include "ulca/group_stats.hpp"
#include "ulca/kernels.hpp"

using namespace ulca;

namespace {

Eigen::MatrixXd pair_distance(double l) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 1) = m(1, 0) = l;
  return m;
}

struct Instance {
  Dataset data;
  GroupStats stats;
  UlcaParams params;
  GroupGeometry geometry;
};

Instance make_instance(std::uint64_t seed, int c = 2) {
  std::mt19937_64 rng(seed);
  Instance in;
  in.data = synthesize_mixture(MixtureSpec{400, 6, c}, rng);
  in.stats = compute_group_stats(in.data);
  in.params.w_tg = Eigen::VectorXd::Constant(c, 0.5);
  in.params.w_bg = Eigen::VectorXd::Constant(c, 0.5);
  in.params.w_bw = Eigen::VectorXd::Constant(c, 0.5);
  in.params.alpha = 1.0;
  SolverConfig cfg;
  cfg.apply_varimax = false;
  const auto proj = solve_projection(in.stats, in.params, cfg);
  in.geometry = group_geometry(kernels::project(in.data.X, proj.M), in.data.labels, c);
  return in;
}

}  // namespace

TEST_CASE("distance cost examples") {
  CHECK(cost_dist(pair_distance(2), pair_distance(2)).value == 0.0);
  const auto over = cost_dist(pair_distance(1), pair_distance(2));
  CHECK(over.value == doctest::Approx(1.0));
  CHECK(over.unclamped == doctest::Approx(1.0));
  CHECK(cost_dist(pair_distance(1), pair_distance(0.5)).value == doctest::Approx(0.5));
  const auto far = cost_dist(pair_distance(1), pair_distance(5));
  CHECK(far.value == 1.0);
  CHECK(far.unclamped == doctest::Approx(4.0));
  CHECK(cost_dist(pair_distance(0), pair_distance(1)).degenerate);
}

TEST_CASE("area cost examples") {
  const Eigen::Vector2d ideal(2, 1);
  CHECK(cost_area(0, ideal, ideal).value == 0.0);
  CHECK(cost_area(0, ideal, Eigen::Vector2d(1, 1)).value == doctest::Approx(0.25));
  const Eigen::Vector3d a(1, 2, 3);
  CHECK(cost_area(1, a, 4.0 * a).value == doctest::Approx(0.0).epsilon(1e-15));
  try {
    (void)cost_area(0, ideal, Eigen::Vector2d(0, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonPositiveArea);
  }
}

TEST_CASE("gesture defaults and interaction specs") {
  const auto move = BackwardConfig::defaults_for(GestureKind::MoveCentroid);
  CHECK(move.r_dist == 0.8);
  CHECK(move.r_area == 0.2);
  const auto scale = BackwardConfig::defaults_for(GestureKind::ScaleEllipse);
  CHECK(scale.r_dist == 0.2);
  CHECK(scale.r_area == 0.8);

  const auto in = make_instance(71, 3);
  const auto s = make_interaction(in.geometry, Gesture{GestureKind::ScaleEllipse, 1, {}, 1.5});
  CHECK(s.ideal_areas(1) == doctest::Approx(2.25 * in.geometry.ellipses[1].area));
  CHECK(s.ideal_areas(0) == in.geometry.ellipses[0].area);
  CHECK(s.ideal_distances == in.geometry.distances);

  const Eigen::Vector2d target = in.geometry.ellipses[0].center + Eigen::Vector2d(1, 1);
  const auto m = make_interaction(in.geometry, Gesture{GestureKind::MoveCentroid, 0, target, 1.0});
  CHECK(m.ideal_distances(1, 2) == in.geometry.distances(1, 2));
  CHECK(m.ideal_distances(0, 1) == doctest::Approx((target - in.geometry.ellipses[1].center).norm()));
  CHECK(m.ideal_areas == in.geometry.areas());
  CHECK_THROWS_AS((void)make_interaction(in.geometry, Gesture{GestureKind::MoveCentroid, 3, {}, 1}), Error);
}

TEST_CASE("identity gesture scores zero and is a fixed point") {
  const auto in = make_instance(72);
  const auto spec = make_interaction(in.geometry, Gesture{GestureKind::ScaleEllipse, 0, {}, 1.0});
  BackwardConfig cfg;
  const auto t = total_cost(spec, cfg, in.params, in.data, in.stats, {});
  CHECK(t.value < 1e-12);
  const BackwardContext ctx{in.data, in.stats, in.params, 1.0};
  const auto r = backward_select(spec, ctx, cfg);
  CHECK(r.cost <= r.cost_init);
  CHECK(r.cost_init < kFixedPointCost);
  CHECK(r.params.w_tg.isApprox(in.params.w_tg));
  CHECK(r.params.w_bg.isApprox(in.params.w_bg));
  CHECK(std::abs(*r.params.alpha - 1.0) < 1e-12);
}

TEST_CASE("pure distance weighting equals the distance term") {
  const auto in = make_instance(73, 3);
  const Eigen::Vector2d target = in.geometry.ellipses[2].center * 0.5;
  const auto spec = make_interaction(in.geometry, Gesture{GestureKind::MoveCentroid, 2, target, 1.0});
  BackwardConfig cfg;
  cfg.r_dist = 1.0;
  cfg.r_area = 0.0;
  UlcaParams theta = in.params;
  theta.alpha = 3.0;
  const auto t = total_cost(spec, cfg, theta, in.data, in.stats, {});
  CHECK(t.value == doctest::Approx(t.dist.value));
}

TEST_CASE("scaling an ellipse moves the area ratio toward the target") {
  const auto in = make_instance(74);
  const int k = 0;
  const auto spec = make_interaction(in.geometry, Gesture{GestureKind::ScaleEllipse, k, {}, 2.0});
  const BackwardContext ctx{in.data, in.stats, in.params, 1.0};
  const auto r = backward_select(spec, ctx, BackwardConfig::defaults_for(GestureKind::ScaleEllipse));
  CHECK(r.cost < r.cost_init);

  SolverConfig cfg;
  cfg.apply_varimax = false;
  const auto proj = solve_projection(in.stats, r.params, cfg);
  const auto after = group_geometry(kernels::project(in.data.X, proj.M), in.data.labels, 2);
  const double ideal = spec.ideal_areas(0) / spec.ideal_areas(1);
  const double initial = in.geometry.ellipses[0].area / in.geometry.ellipses[1].area;
  const double achieved = after.ellipses[0].area / after.ellipses[1].area;
  CHECK(std::abs(std::log(achieved) - std::log(ideal)) < std::abs(std::log(initial) - std::log(ideal)));
}

TEST_CASE("theta encoding round-trips") {
  UlcaParams p;
  p.w_tg = Eigen::Vector3d(0.1, 0.2, 0.3);
  p.w_bg = Eigen::Vector3d(0.4, 0.5, 0.6);
  p.w_bw = Eigen::Vector3d(0.7, 0.8, 0.9);
  for (double alpha : {1e-3, 0.05, 1.0, 42.0, 1e3}) {
    const auto x = theta::encode(p, alpha);
    CHECK(x.size() == 10);
    const auto back = theta::decode(x, p);
    CHECK(back.w_tg == p.w_tg);
    CHECK(*back.alpha == doctest::Approx(alpha).epsilon(1e-12));
  }
  CHECK(*theta::decode(theta::encode(p, 1e6), p).alpha == doctest::Approx(1e3));
  CHECK(*theta::decode(theta::encode(p, 0.0), p).alpha == doctest::Approx(1e-3));
}

TEST_CASE("zero trials yield an empty report") {
  const auto report = evaluate_backward(MixtureSpec{}, {20, 40}, 0, 7);
  CHECK(report.settings.empty());
  CHECK(report.trials == 0);
}

TEST_CASE("config validation") {
  BackwardConfig cfg;
  cfg.r_dist = 0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_SUITE("invariants") {
  TEST_CASE("costs stay within the unit interval") {
    std::mt19937_64 rng(75);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto in = make_instance(76, 3);
    int fits = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int c = 3;
      Eigen::VectorXd x(3 * c + 1);
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
      const UlcaParams theta = theta::decode(x, in.params);
      const Gesture g = random_gesture(in.geometry.centers(), c, rng);
      const auto spec = make_interaction(in.geometry, g);
      BackwardConfig cfg = BackwardConfig::defaults_for(g.kind);
      if (trial % 2 == 0) {
        cfg.r_dist = u(rng);
        cfg.r_area = 1.0 - cfg.r_dist;
      }
      const auto t = trial % 10 == 0 ? total_cost(spec, cfg, theta, in.data, in.stats, {})
                                     : combine_costs(spec, cfg, in.geometry);
      fits += trial % 10 == 0;
      CHECK(t.value >= 0.0);
      CHECK(t.value <= 1.0);
      CHECK(t.dist.value >= 0.0);
      CHECK(t.dist.value <= 1.0);
      CHECK(t.area.value >= 0.0);
      CHECK(t.area.value <= 1.0);
      CHECK(t.unclamped >= t.value - 1e-15);
    }
    CHECK(fits == 100);
  }

  TEST_CASE("backward selection trace is non-increasing") {
    std::mt19937_64 rng(77);
    const auto in = make_instance(78);
    for (int trial = 0; trial < 5; ++trial) {
      const Gesture g = random_gesture(in.geometry.centers(), 2, rng);
      const auto spec = make_interaction(in.geometry, g);
      const BackwardContext ctx{in.data, in.stats, in.params, 1.0};
      const auto r = backward_select(spec, ctx, BackwardConfig::defaults_for(g.kind));
      CHECK(r.cost <= r.cost_init + 1e-12);
      for (std::size_t t = 1; t < r.trace.size(); ++t) CHECK(r.trace[t].second <= r.trace[t - 1].second);
    }
  }
}
