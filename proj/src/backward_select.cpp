#include "ulca/backward_select.hpp"

#include <chrono>
#include <cmath>

#include "ulca/error.hpp"
#include "ulca/kernels.hpp"

namespace ulca {

void InteractionSpec::validate() const {
  const auto c = ideal_areas.size();
  if (ideal_distances.rows() != c || ideal_distances.cols() != c) {
    throw Error(Errc::DimensionMismatch, "ideal distances must be c x c");
  }
  if (target_group < 0 || target_group >= c) {
    throw Error(Errc::InvalidArgument, "target group out of range");
  }
  for (Eigen::Index i = 0; i < c; ++i) {
    if (ideal_distances(i, i) != 0.0) throw Error(Errc::InvalidArgument, "ideal distance diagonal must be zero");
    if (!(ideal_areas(i) > 0.0)) throw Error(Errc::NonPositiveArea, "ideal areas must be positive");
    for (Eigen::Index j = 0; j < c; ++j) {
      if (!(ideal_distances(i, j) >= 0.0) || ideal_distances(i, j) != ideal_distances(j, i)) {
        throw Error(Errc::InvalidArgument, "ideal distances must be symmetric and nonnegative");
      }
    }
  }
}

InteractionSpec make_interaction(const GroupGeometry& current, const Gesture& gesture) {
  const int c = static_cast<int>(current.ellipses.size());
  if (gesture.group < 0 || gesture.group >= c) {
    throw Error(Errc::InvalidArgument, "gesture group out of range");
  }
  InteractionSpec spec;
  spec.kind = gesture.kind;
  spec.target_group = gesture.group;
  spec.ideal_areas = current.areas();
  if (gesture.kind == GestureKind::MoveCentroid) {
    if (!gesture.target.allFinite()) throw Error(Errc::InvalidArgument, "gesture target is not finite");
    Eigen::MatrixXd centers = current.centers();
    centers.row(gesture.group) = gesture.target.transpose();
    spec.ideal_distances = centroid_distances(centers);
  } else {
    if (!(gesture.factor > 0.0) || !std::isfinite(gesture.factor)) {
      throw Error(Errc::InvalidArgument, "scale factor must be positive");
    }
    spec.ideal_distances = current.distances;
    spec.ideal_areas(gesture.group) *= gesture.factor * gesture.factor;
  }
  spec.validate();
  return spec;
}

BackwardConfig BackwardConfig::defaults_for(GestureKind kind) {
  BackwardConfig cfg;
  if (kind == GestureKind::ScaleEllipse) {
    cfg.r_dist = 0.2;
    cfg.r_area = 0.8;
  }
  return cfg;
}

void BackwardConfig::validate() const {
  if (!(r_dist >= 0.0) || !(r_area >= 0.0) || std::abs(r_dist + r_area - 1.0) > 1e-12) {
    throw Error(Errc::InvalidArgument, "r_dist and r_area must be nonnegative and sum to 1");
  }
  if (max_iters < 1) throw Error(Errc::InvalidArgument, "max_iters must be at least 1");
  if (!(rho_init > 0.0) || !(rho_final > 0.0) || rho_final > rho_init) {
    throw Error(Errc::InvalidArgument, "need 0 < rho_final <= rho_init");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(Errc::InvalidArgument, "confidence must lie in (0, 1)");
  }
}

CostTerm cost_dist(const Eigen::MatrixXd& l_ideal, const Eigen::MatrixXd& l_new) {
  if (l_ideal.rows() != l_new.rows() || l_ideal.cols() != l_new.cols()) {
    throw Error(Errc::DimensionMismatch, "distance matrices differ in shape");
  }
  const double den = l_ideal.squaredNorm();
  CostTerm out;
  if (!(den > 0.0)) {
    out.degenerate = true;
    return out;
  }
  out.unclamped = std::sqrt((l_ideal - l_new).squaredNorm() / den);
  out.value = std::min(1.0, out.unclamped);
  return out;
}

CostTerm cost_area(int k, const Eigen::VectorXd& a_ideal, const Eigen::VectorXd& a_new) {
  const auto c = a_ideal.size();
  if (a_new.size() != c) throw Error(Errc::DimensionMismatch, "area vectors differ in length");
  if (k < 0 || k >= c) throw Error(Errc::InvalidArgument, "target group out of range");
  if (!(a_ideal.array() > 0.0).all() || !(a_new.array() > 0.0).all()) {
    throw Error(Errc::NonPositiveArea, "ellipse areas must be positive");
  }
  double sad = 0.0;
  for (Eigen::Index i = 0; i < c; ++i) {
    if (i == k) continue;
    const double ideal = a_ideal(k) / a_ideal(i);
    const double now = a_new(k) / a_new(i);
    sad += std::abs(ideal - now) / ideal;
  }
  CostTerm out;
  out.unclamped = sad / static_cast<double>(c);
  out.value = std::min(1.0, out.unclamped);
  return out;
}

TotalCost combine_costs(const InteractionSpec& spec, const BackwardConfig& cfg,
                        const GroupGeometry& geometry) {
  TotalCost t;
  t.dist = cost_dist(spec.ideal_distances, geometry.distances);
  t.area = cost_area(spec.target_group, spec.ideal_areas, geometry.areas());
  t.value = cfg.r_dist * t.dist.value + cfg.r_area * t.area.value;
  t.unclamped = cfg.r_dist * t.dist.unclamped + cfg.r_area * t.area.unclamped;
  return t;
}

namespace {

SolverConfig inner_solver(const SolverConfig& base) {
  SolverConfig cfg = base;
  cfg.backend = Backend::Evd;
  // Distances and areas are rotation invariant, so varimax is irrelevant here.
  cfg.apply_varimax = false;
  return cfg;
}

}  // namespace

TotalCost total_cost(const InteractionSpec& spec, const BackwardConfig& cfg, const UlcaParams& theta,
                     const Dataset& data, const GroupStats& stats, const SolverConfig& solver_cfg) {
  if (!theta.alpha) throw Error(Errc::InvalidArgument, "backward selection fits need a fixed alpha");
  try {
    const Projection proj = solve_projection(stats, theta, inner_solver(solver_cfg));
    const Eigen::MatrixXd Z = kernels::project(data.X, proj.M);
    return combine_costs(spec, cfg, group_geometry(Z, data.labels, data.num_groups(), cfg.confidence));
  } catch (const Error&) {
    TotalCost worst;
    worst.value = worst.unclamped = 1.0;
    worst.fit_failed = true;
    return worst;
  }
}

namespace theta {

Eigen::VectorXd encode(const UlcaParams& params, double alpha) {
  const auto c = params.w_tg.size();
  Eigen::VectorXd x(3 * c + 1);
  x << params.w_tg, params.w_bg, params.w_bw, 0.0;
  const double clamped = std::clamp(alpha, kMinAlpha, kMaxAlpha);
  x(3 * c) = (std::log10(clamped) - std::log10(kMinAlpha)) /
             (std::log10(kMaxAlpha) - std::log10(kMinAlpha));
  return x.cwiseMax(0.0).cwiseMin(1.0);
}

UlcaParams decode(const Eigen::VectorXd& x, const UlcaParams& base) {
  const auto c = base.w_tg.size();
  if (x.size() != 3 * c + 1) throw Error(Errc::DimensionMismatch, "theta has the wrong length");
  const Eigen::VectorXd u = x.cwiseMax(0.0).cwiseMin(1.0);
  UlcaParams p = base;
  p.w_tg = u.segment(0, c);
  p.w_bg = u.segment(c, c);
  p.w_bw = u.segment(2 * c, c);
  const double lo = std::log10(kMinAlpha);
  const double hi = std::log10(kMaxAlpha);
  p.alpha = std::pow(10.0, lo + u(3 * c) * (hi - lo));
  return p;
}

}  // namespace theta

BackwardResult backward_select(const InteractionSpec& spec, const BackwardContext& ctx,
                               const BackwardConfig& cfg, std::optional<double> e_opt,
                               const std::atomic<bool>* cancel, const ProgressFn& progress) {
  cfg.validate();
  spec.validate();
  if (ctx.current.dprime != 2) {
    throw Error(Errc::InvalidArgument, "backward selection works on 2D embeddings");
  }
  if (spec.ideal_areas.size() != ctx.data.num_groups()) {
    throw Error(Errc::DimensionMismatch, "interaction and dataset disagree on group count");
  }
  const SolverConfig solver_cfg;
  const Eigen::VectorXd x0 = theta::encode(ctx.current, ctx.current_alpha);
  auto score = [&](const Eigen::VectorXd& x) {
    return total_cost(spec, cfg, theta::decode(x, ctx.current), ctx.data, ctx.stats, solver_cfg).value;
  };
  const double f0 = score(x0);
  auto objective = [&](const Eigen::VectorXd& x) { return x == x0 ? f0 : score(x); };

  BackwardResult out;
  CobylaResult run;
  if (f0 <= kFixedPointCost) {
    run.x = x0;
    run.f = run.f_init = f0;
    run.evaluations = 1;
    run.trace.push_back({x0, f0});
  } else {
    const Eigen::VectorXd lower = Eigen::VectorXd::Zero(x0.size());
    const Eigen::VectorXd upper = Eigen::VectorXd::Ones(x0.size());
    run = cobyla_minimize(objective, x0, lower, upper,
                          CobylaConfig{cfg.rho_init, cfg.rho_final, cfg.max_iters}, cancel, progress);
  }

  out.cancelled = run.cancelled;
  out.params = (run.f < f0) ? theta::decode(run.x, ctx.current) : theta::decode(x0, ctx.current);
  out.cost_init = f0;
  out.cost = std::min(run.f, f0);
  out.cost_unclamped =
      total_cost(spec, cfg, out.params, ctx.data, ctx.stats, solver_cfg).unclamped;
  out.iterations = run.evaluations;
  out.trace.reserve(run.trace.size());
  for (const auto& step : run.trace) out.trace.emplace_back(theta::decode(step.x, ctx.current), step.f);
  if (e_opt) {
    const double gap = out.cost_init - *e_opt;
    if (gap > kFixedPointCost) out.accuracy = (out.cost_init - out.cost) / gap;
  }
  return out;
}

// ---------------------------------------------------------------------------

Dataset synthesize_mixture(const MixtureSpec& spec, std::mt19937_64& rng) {
  if (spec.n < 2 || spec.d < 2 || spec.c < 1 || spec.n < spec.c) {
    throw Error(Errc::InvalidArgument, "mixture needs n >= max(2, c), d >= 2, c >= 1");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> spread(0.5, 1.5);
  Dataset data;
  data.X.resize(spec.n, spec.d);
  data.labels.resize(static_cast<std::size_t>(spec.n));
  for (int a = 0; a < spec.d; ++a) data.attribute_names.push_back("x" + std::to_string(a + 1));
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> factors;
  for (int j = 0; j < spec.c; ++j) {
    data.group_names.push_back("g" + std::to_string(j));
    Eigen::VectorXd mean(spec.d);
    for (int a = 0; a < spec.d; ++a) mean(a) = 1.5 * normal(rng);
    Eigen::MatrixXd L(spec.d, spec.d);
    const double s = spread(rng) / std::sqrt(static_cast<double>(spec.d));
    for (Eigen::Index i = 0; i < L.size(); ++i) L.data()[i] = s * normal(rng);
    L.diagonal().array() += 0.3 * spread(rng);
    means.push_back(std::move(mean));
    factors.push_back(std::move(L));
  }
  Eigen::VectorXd z(spec.d);
  for (int i = 0; i < spec.n; ++i) {
    const int j = i % spec.c;
    for (int a = 0; a < spec.d; ++a) z(a) = normal(rng);
    data.X.row(i) = (means[static_cast<std::size_t>(j)] + factors[static_cast<std::size_t>(j)] * z).transpose();
    data.labels[static_cast<std::size_t>(i)] = j;
  }
  return data;
}

Gesture random_gesture(const Eigen::MatrixXd& Z, int num_groups, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick_group(0, num_groups - 1);
  std::bernoulli_distribution pick_move(0.5);
  Gesture g;
  g.group = pick_group(rng);
  if (pick_move(rng)) {
    g.kind = GestureKind::MoveCentroid;
    const Eigen::RowVector2d lo = Z.colwise().minCoeff();
    const Eigen::RowVector2d hi = Z.colwise().maxCoeff();
    for (int k = 0; k < 2; ++k) {
      std::uniform_real_distribution<double> coord(lo(k), hi(k));
      g.target(k) = coord(rng);
    }
  } else {
    g.kind = GestureKind::ScaleEllipse;
    std::uniform_real_distribution<double> factor(0.5, 2.0);
    g.factor = factor(rng);
  }
  return g;
}

EvalReport evaluate_backward(const MixtureSpec& mixture, const std::vector<int>& m_values,
                             int trials, std::uint64_t seed, int m_opt) {
  if (trials < 0) throw Error(Errc::InvalidArgument, "trials must be nonnegative");
  for (int m : m_values) {
    if (m < 1) throw Error(Errc::InvalidArgument, "m values must be positive");
  }
  EvalReport report;
  report.mixture = mixture;
  report.trials = trials;
  report.m_opt = m_opt;
  report.seed = seed;
  if (trials == 0) return report;

  std::mt19937_64 rng(seed);
  const Dataset data = synthesize_mixture(mixture, rng);
  const GroupStats stats = compute_group_stats(data);
  const SolverConfig solver_cfg = inner_solver(SolverConfig{});

  std::vector<double> seconds(m_values.size(), 0.0);
  std::vector<double> accuracy(m_values.size(), 0.0);
  std::vector<int> used(m_values.size(), 0);
  int discarded = 0;
  std::uniform_real_distribution<double> weight(0.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    UlcaParams params;
    params.w_tg.resize(mixture.c);
    params.w_bg.resize(mixture.c);
    params.w_bw.resize(mixture.c);
    for (int j = 0; j < mixture.c; ++j) {
      params.w_tg(j) = weight(rng);
      params.w_bg(j) = weight(rng);
      params.w_bw(j) = weight(rng);
    }
    params.alpha = 1.0;
    const Projection proj = solve_projection(stats, params, solver_cfg);
    const Eigen::MatrixXd Z = kernels::project(data.X, proj.M);
    const GroupGeometry geometry = group_geometry(Z, data.labels, mixture.c);
    const Gesture gesture = random_gesture(Z, mixture.c, rng);
    const InteractionSpec spec = make_interaction(geometry, gesture);
    const BackwardContext ctx{data, stats, params, 1.0};

    BackwardConfig cfg = BackwardConfig::defaults_for(gesture.kind);
    cfg.max_iters = m_opt;
    const double e_opt = backward_select(spec, ctx, cfg).cost;

    bool counted = false;
    for (std::size_t s = 0; s < m_values.size(); ++s) {
      cfg.max_iters = m_values[s];
      const auto start = std::chrono::steady_clock::now();
      const BackwardResult r = backward_select(spec, ctx, cfg, e_opt);
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      if (!r.accuracy) continue;
      counted = true;
      seconds[s] += elapsed.count();
      accuracy[s] += *r.accuracy;
      ++used[s];
    }
    if (!counted) ++discarded;
  }

  for (std::size_t s = 0; s < m_values.size(); ++s) {
    EvalSetting setting;
    setting.m = m_values[s];
    setting.cases_used = used[s];
    setting.cases_discarded = discarded;
    if (used[s] > 0) {
      setting.mean_seconds = seconds[s] / used[s];
      setting.mean_accuracy = accuracy[s] / used[s];
    }
    report.settings.push_back(setting);
  }
  return report;
}

}  // namespace ulca
