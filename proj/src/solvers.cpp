#include "ulca/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>

#include "ulca/error.hpp"

namespace ulca {

std::string_view backend_name(Backend backend) noexcept {
  return backend == Backend::Evd ? "evd" : "manifold";
}

std::optional<Backend> parse_backend(std::string_view text) noexcept {
  if (text == "evd") return Backend::Evd;
  if (text == "manifold") return Backend::Manifold;
  return std::nullopt;
}

void SolverConfig::validate() const {
  if (!(convergence_tol > 0.0) || !(dinkelbach_tol > 0.0)) {
    throw Error(Errc::InvalidArgument, "solver tolerances must be positive");
  }
  if (dinkelbach_max_iters < 1 || (max_manifold_iters && *max_manifold_iters < 1)) {
    throw Error(Errc::InvalidArgument, "solver iteration caps must be at least 1");
  }
}

namespace {

void check_square(const Eigen::MatrixXd& A, int dprime, const char* name) {
  if (A.rows() != A.cols()) {
    throw Error(Errc::DimensionMismatch, std::string(name) + " must be square");
  }
  if (dprime < 1 || dprime > A.rows()) {
    throw Error(Errc::DimensionMismatch, "target dimension " + std::to_string(dprime) +
                                             " outside [1, " + std::to_string(A.rows()) + "]");
  }
  if (!A.allFinite()) throw Error(Errc::NonFiniteInput, std::string(name) + " is not finite");
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& A) { return 0.5 * (A + A.transpose()); }

double trace_form(const Eigen::MatrixXd& M, const Eigen::MatrixXd& A) {
  return (M.transpose() * A * M).trace();
}

double ratio_of(const Eigen::MatrixXd& M, const Eigen::MatrixXd& C0, const Eigen::MatrixXd& C1) {
  const double den = trace_form(M, C1);
  if (!(std::abs(den) > 0.0)) {
    throw Error(Errc::SingularDenominator,
                "tr(M^T C1 M) vanished; raise gamma1 or the background weights");
  }
  return trace_form(M, C0) / den;
}

double abs_trace(const Eigen::MatrixXd& A) { return A.diagonal().cwiseAbs().sum(); }

// ---------------------------------------------------------------------------
// Riemannian trust-region minimization on the Grassmann manifold, with points
// stored as orthonormal d x p bases. Tangent vectors H satisfy M^T H = 0.

struct GrassmannCost {
  std::function<double(const Eigen::MatrixXd&)> value;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> egrad;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, const Eigen::MatrixXd&,
                                const Eigen::MatrixXd&)>
      ehess;  // (M, egrad(M), H)
  std::function<double(const Eigen::MatrixXd&, double)> grad_scale;  // (M, value)
};

Eigen::MatrixXd tangent_project(const Eigen::MatrixXd& M, const Eigen::MatrixXd& X) {
  return X - M * (M.transpose() * X);
}

double inner(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  return (A.array() * B.array()).sum();
}

Eigen::MatrixXd retract(const Eigen::MatrixXd& M, const Eigen::MatrixXd& H) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(M + H);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), M.cols());
  const Eigen::MatrixXd R = qr.matrixQR().topRows(M.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < M.cols(); ++k) {
    if (R(k, k) < 0.0) Q.col(k) = -Q.col(k);
  }
  return Q;
}

struct TcgResult {
  Eigen::MatrixXd eta;
  Eigen::MatrixXd Heta;
  bool hit_boundary = false;
};

// Steihaug-Toint truncated CG on the trust-region subproblem.
TcgResult truncated_cg(const Eigen::MatrixXd& M, const Eigen::MatrixXd& grad,
                       const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& hess,
                       double radius, int max_inner) {
  constexpr double kappa = 0.1;
  constexpr double theta = 1.0;
  TcgResult out{Eigen::MatrixXd::Zero(M.rows(), M.cols()),
                Eigen::MatrixXd::Zero(M.rows(), M.cols()), false};

  Eigen::MatrixXd r = grad;
  double r_r = inner(r, r);
  const double norm_r0 = std::sqrt(r_r);
  Eigen::MatrixXd z = r;
  double z_r = r_r;
  double d_Pd = z_r;
  double e_Pe = 0.0;
  double e_Pd = 0.0;
  Eigen::MatrixXd dir = -z;

  for (int j = 0; j < max_inner; ++j) {
    const Eigen::MatrixXd Hdir = hess(dir);
    const double d_Hd = inner(dir, Hdir);
    const double step = z_r / d_Hd;
    const double e_Pe_new = e_Pe + 2.0 * step * e_Pd + step * step * d_Pd;
    if (d_Hd <= 0.0 || e_Pe_new >= radius * radius) {
      const double tau =
          (-e_Pd + std::sqrt(e_Pd * e_Pd + d_Pd * (radius * radius - e_Pe))) / d_Pd;
      out.eta += tau * dir;
      out.Heta += tau * Hdir;
      out.hit_boundary = true;
      return out;
    }
    e_Pe = e_Pe_new;
    out.eta += step * dir;
    out.Heta += step * Hdir;
    r = tangent_project(M, r + step * Hdir);
    r_r = inner(r, r);
    const double norm_r = std::sqrt(r_r);
    if (norm_r <= norm_r0 * std::min(std::pow(norm_r0, theta), kappa)) break;
    z = r;
    const double z_r_old = z_r;
    z_r = inner(z, r);
    const double beta = z_r / z_r_old;
    dir = tangent_project(M, -z + beta * dir);
    e_Pd = beta * (e_Pd + step * d_Pd);
    d_Pd = z_r + beta * beta * d_Pd;
  }
  return out;
}

struct RtrOutcome {
  Eigen::MatrixXd M;
  double value = 0.0;  // of the maximized objective
  int iterations = 0;
  bool converged = false;
};

// Maximizes cost.value by minimizing its negation.
RtrOutcome maximize_rtr(const GrassmannCost& cost, Eigen::MatrixXd M, int max_iters, double tol) {
  const auto p = M.cols();
  const auto d = M.rows();
  const double radius_max = std::numbers::pi / 2.0 * std::sqrt(static_cast<double>(p));
  double radius = radius_max / 8.0;
  const int max_inner = std::max<int>(1, static_cast<int>(p * (d - p)));

  auto riemannian_grad = [&](const Eigen::MatrixXd& X, const Eigen::MatrixXd& eg) {
    return Eigen::MatrixXd(-tangent_project(X, eg));
  };

  double f = cost.value(M);
  Eigen::MatrixXd eg = cost.egrad(M);
  Eigen::MatrixXd grad = riemannian_grad(M, eg);

  RtrOutcome out;
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    if (std::sqrt(inner(grad, grad)) <= tol * cost.grad_scale(M, f)) break;
    const Eigen::MatrixXd MtG = M.transpose() * eg;
    auto hess = [&](const Eigen::MatrixXd& H) {
      Eigen::MatrixXd hf = tangent_project(M, cost.ehess(M, eg, H)) - H * MtG;
      return Eigen::MatrixXd(-hf);
    };
    const TcgResult step = truncated_cg(M, grad, hess, radius, max_inner);
    const Eigen::MatrixXd candidate = retract(M, step.eta);
    const double f_new = cost.value(candidate);

    // h = -f is minimized; model decrease of h.
    const double reg = std::max(1.0, std::abs(f)) * std::numeric_limits<double>::epsilon() * 1e3;
    const double actual = (f_new - f) + reg;
    const double predicted = -inner(grad, step.eta) - 0.5 * inner(step.eta, step.Heta) + reg;
    const double rho = predicted > 0.0 ? actual / predicted : -1.0;

    if (rho < 0.25) {
      radius *= 0.25;
    } else if (rho > 0.75 && step.hit_boundary) {
      radius = std::min(2.0 * radius, radius_max);
    }
    if (rho > 0.1) {
      M = candidate;
      f = f_new;
      eg = cost.egrad(M);
      grad = riemannian_grad(M, eg);
    }
  }
  out.iterations = iter;
  out.value = f;
  out.converged = std::sqrt(inner(grad, grad)) <= 10.0 * tol * cost.grad_scale(M, f);
  out.M = std::move(M);
  return out;
}

// Coordinate axes with the best per-axis score, nudged off any saddle by a
// fixed pseudo-random perturbation.
Eigen::MatrixXd initial_basis(const Eigen::VectorXd& score, int dprime) {
  const auto d = score.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return score(a) > score(b); });
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, dprime);
  for (int k = 0; k < dprime; ++k) M(order[static_cast<std::size_t>(k)], k) = 1.0;

  std::mt19937_64 rng(0x5eedULL + static_cast<std::uint64_t>(d) * 131 + dprime);
  std::normal_distribution<double> normal(0.0, 0.1);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] += normal(rng);
  return retract(Eigen::MatrixXd::Zero(d, dprime), M);
}

}  // namespace

TopEigen top_eigenvectors(const Eigen::MatrixXd& A, int dprime) {
  check_square(A, dprime, "objective matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(A));
  if (eig.info() != Eigen::Success) {
    throw Error(Errc::EigenFailure, "symmetric eigendecomposition did not converge");
  }
  const auto d = A.rows();
  TopEigen out;
  out.vectors.resize(d, dprime);
  for (int k = 0; k < dprime; ++k) {
    out.vectors.col(k) = eig.eigenvectors().col(d - 1 - k);
    out.value_sum += eig.eigenvalues()(d - 1 - k);
  }
  return out;
}

Projection solve_trace_difference(const Eigen::MatrixXd& A, int dprime, const SolverConfig& cfg) {
  cfg.validate();
  check_square(A, dprime, "objective matrix");
  if (cfg.backend == Backend::Manifold) {
    return solve_manifold(TraceObjective{A, Eigen::MatrixXd::Zero(A.rows(), A.cols()), 0.0},
                          dprime, cfg);
  }
  TopEigen top = top_eigenvectors(A, dprime);
  Projection out;
  out.M = canonicalize_axes(top.vectors);
  out.objective = top.value_sum;
  out.backend = Backend::Evd;
  out.iterations = 1;
  return out;
}

Projection solve_trace_ratio(const Eigen::MatrixXd& C0, const Eigen::MatrixXd& C1, int dprime,
                             const SolverConfig& cfg) {
  cfg.validate();
  check_square(C0, dprime, "C0");
  check_square(C1, dprime, "C1");
  if (C0.rows() != C1.rows()) throw Error(Errc::DimensionMismatch, "C0 and C1 differ in size");
  if (cfg.backend == Backend::Manifold) {
    return solve_manifold(TraceObjective{C0, C1, std::nullopt}, dprime, cfg);
  }

  const Eigen::MatrixXd S0 = symmetrized(C0);
  const Eigen::MatrixXd S1 = symmetrized(C1);
  const double tolerance = cfg.dinkelbach_tol * (abs_trace(S0) + abs_trace(S1));

  Projection out;
  out.backend = Backend::Evd;
  out.alpha_history.push_back(0.0);
  double alpha = 0.0;
  double residual = 0.0;
  TopEigen top;
  for (int t = 0;; ++t) {
    top = top_eigenvectors(S0 - alpha * S1, dprime);
    residual = top.value_sum;
    if (std::abs(residual) < tolerance || t == cfg.dinkelbach_max_iters) break;
    alpha = ratio_of(top.vectors, S0, S1);
    out.alpha_history.push_back(alpha);
  }
  out.iterations = static_cast<int>(out.alpha_history.size()) - 1;
  out.converged = std::abs(residual) <= 10.0 * tolerance;
  out.M = canonicalize_axes(top.vectors);
  out.objective = ratio_of(out.M, S0, S1);
  out.alpha_used = out.objective;
  return out;
}

Projection solve_manifold(const TraceObjective& objective, int dprime, const SolverConfig& cfg) {
  cfg.validate();
  check_square(objective.C0, dprime, "C0");
  check_square(objective.C1, dprime, "C1");
  const auto d = objective.C0.rows();
  const int max_iters = cfg.max_manifold_iters.value_or(std::max(static_cast<int>(d), kMinManifoldIters));

  GrassmannCost cost;
  Eigen::VectorXd score;
  if (objective.alpha) {
    const double alpha = *objective.alpha;
    const Eigen::MatrixXd A = symmetrized(objective.C0 - alpha * objective.C1);
    const double scale = std::max(A.norm(), std::numeric_limits<double>::min());
    cost.value = [A](const Eigen::MatrixXd& M) { return trace_form(M, A); };
    cost.egrad = [A](const Eigen::MatrixXd& M) { return Eigen::MatrixXd(2.0 * A * M); };
    cost.ehess = [A](const Eigen::MatrixXd&, const Eigen::MatrixXd&, const Eigen::MatrixXd& H) {
      return Eigen::MatrixXd(2.0 * A * H);
    };
    cost.grad_scale = [scale](const Eigen::MatrixXd&, double) { return scale; };
    score = A.diagonal();
  } else {
    const Eigen::MatrixXd S0 = symmetrized(objective.C0);
    const Eigen::MatrixXd S1 = symmetrized(objective.C1);
    cost.value = [S0, S1](const Eigen::MatrixXd& M) { return ratio_of(M, S0, S1); };
    cost.egrad = [S0, S1](const Eigen::MatrixXd& M) {
      const double b = trace_form(M, S1);
      const double f = trace_form(M, S0) / b;
      return Eigen::MatrixXd(2.0 * (S0 * M - f * (S1 * M)) / b);
    };
    cost.ehess = [S0, S1](const Eigen::MatrixXd& M, const Eigen::MatrixXd& G,
                          const Eigen::MatrixXd& H) {
      const double b = trace_form(M, S1);
      const double f = trace_form(M, S0) / b;
      const double df = inner(G, H);
      const double db = 2.0 * inner(S1 * M, H);
      return Eigen::MatrixXd(2.0 * (S0 * H - f * (S1 * H) - df * (S1 * M)) / b - G * (db / b));
    };
    const double n0 = S0.norm();
    const double n1 = S1.norm();
    cost.grad_scale = [S1, n0, n1](const Eigen::MatrixXd& M, double f) {
      const double b = std::abs(trace_form(M, S1));
      return std::max((n0 + std::abs(f) * n1) / b, std::numeric_limits<double>::min());
    };
    score = S0.diagonal().array() / (S1.diagonal().array().abs() + 1e-300);
  }

  RtrOutcome run = maximize_rtr(cost, initial_basis(score, dprime), max_iters, cfg.convergence_tol);
  Projection out;
  out.backend = Backend::Manifold;
  out.M = canonicalize_axes(run.M);
  out.objective = cost.value(out.M);
  out.alpha_used = objective.alpha ? *objective.alpha : out.objective;
  out.iterations = run.iterations;
  out.converged = run.converged;
  return out;
}

double varimax_criterion(const Eigen::MatrixXd& M) {
  const double d = static_cast<double>(M.rows());
  const Eigen::ArrayXXd sq = M.array().square();
  double total = 0.0;
  for (Eigen::Index k = 0; k < M.cols(); ++k) {
    const double mean_sq = sq.col(k).sum() / d;
    total += sq.col(k).square().sum() / d - mean_sq * mean_sq;
  }
  return total;
}

Eigen::MatrixXd varimax(const Eigen::MatrixXd& M) {
  Eigen::MatrixXd L = M;
  const auto p = L.cols();
  if (p < 2) return L;
  const double d = static_cast<double>(L.rows());
  constexpr int kMaxSweeps = 500;
  double criterion = varimax_criterion(L);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    for (Eigen::Index a = 0; a + 1 < p; ++a) {
      for (Eigen::Index b = a + 1; b < p; ++b) {
        const Eigen::ArrayXd x = L.col(a).array();
        const Eigen::ArrayXd y = L.col(b).array();
        const Eigen::ArrayXd u = x.square() - y.square();
        const Eigen::ArrayXd v = 2.0 * x * y;
        const double A = u.sum();
        const double B = v.sum();
        const double C = (u.square() - v.square()).sum();
        const double D = 2.0 * (u * v).sum();
        const double phi = 0.25 * std::atan2(D - 2.0 * A * B / d, C - (A * A - B * B) / d);
        const double cs = std::cos(phi);
        const double sn = std::sin(phi);
        L.col(a) = (cs * x + sn * y).matrix();
        L.col(b) = (-sn * x + cs * y).matrix();
      }
    }
    const double next = varimax_criterion(L);
    const double gain = next - criterion;
    criterion = next;
    if (gain < 1e-10) break;
  }
  return L;
}

Eigen::MatrixXd canonicalize_axes(const Eigen::MatrixXd& M) {
  Eigen::MatrixXd S = M;
  for (Eigen::Index k = 0; k < S.cols(); ++k) {
    auto col = S.col(k);
    const double sum = col.sum();
    const double tie = 1e-12 * col.cwiseAbs().sum();
    bool flip = sum < -tie;
    if (std::abs(sum) <= tie) {
      Eigen::Index imax = 0;
      col.cwiseAbs().maxCoeff(&imax);
      flip = col(imax) < 0.0;
    }
    if (flip) col = -col;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(S.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return S.col(a).maxCoeff() > S.col(b).maxCoeff();
  });
  Eigen::MatrixXd out(S.rows(), S.cols());
  for (Eigen::Index k = 0; k < S.cols(); ++k) out.col(k) = S.col(order[static_cast<std::size_t>(k)]);
  return out;
}

ProcrustesResult procrustes_align(const Eigen::MatrixXd& Z_prev, const Eigen::MatrixXd& Z_new) {
  if (Z_prev.rows() != Z_new.rows() || Z_prev.cols() != Z_new.cols()) {
    throw Error(Errc::DimensionMismatch, "Procrustes inputs differ in shape");
  }
  if (Z_new.cols() < 1) throw Error(Errc::DimensionMismatch, "Procrustes needs at least one axis");
  const auto p = Z_new.cols();
  const Eigen::MatrixXd K = Z_new.transpose() * Z_prev;
  ProcrustesResult out;
  if (!(K.norm() > 1e-14 * Z_new.norm() * Z_prev.norm()) || !K.allFinite()) {
    out.R = Eigen::MatrixXd::Identity(p, p);
    out.degenerate = true;
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.R = svd.matrixU() * svd.matrixV().transpose();
  }
  out.Z_aligned = Z_new * out.R;
  return out;
}

}  // namespace ulca
