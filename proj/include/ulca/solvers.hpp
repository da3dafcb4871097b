#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ulca {

enum class Backend { Evd, Manifold };

std::string_view backend_name(Backend backend) noexcept;
std::optional<Backend> parse_backend(std::string_view text) noexcept;

/// Floor of the default manifold iteration cap.
inline constexpr int kMinManifoldIters = 100;

struct SolverConfig {
  Backend backend = Backend::Evd;
  std::optional<int> max_manifold_iters;  // unset: max(d, kMinManifoldIters)
  double convergence_tol = 1e-8;
  int dinkelbach_max_iters = 30;
  double dinkelbach_tol = 1e-6;
  bool apply_varimax = true;

  /// Throws InvalidArgument on non-positive tolerances or caps.
  void validate() const;
};

/// Orthonormal d x d' basis plus how it was obtained.
struct Projection {
  Eigen::MatrixXd M;
  double objective = 0.0;
  double alpha_used = 0.0;
  Backend backend = Backend::Evd;
  int iterations = 0;
  /// False when an iteration cap was hit with the residual above 10x tolerance;
  /// M is then the best iterate, not a failure.
  bool converged = true;
  /// Dinkelbach ratio sequence alpha_0 = 0, alpha_1, ... (ratio mode, EVD only).
  std::vector<double> alpha_history;
};

/// max tr(M^T A M) over M^T M = I.
Projection solve_trace_difference(const Eigen::MatrixXd& A, int dprime, const SolverConfig& cfg);

/// max tr(M^T C0 M) / tr(M^T C1 M) over M^T M = I.
Projection solve_trace_ratio(const Eigen::MatrixXd& C0, const Eigen::MatrixXd& C1, int dprime,
                             const SolverConfig& cfg);

/// Objective for the Grassmann trust-region solver: either the difference
/// tr(M^T (C0 - alpha C1) M) or, with alpha unset, the ratio.
struct TraceObjective {
  Eigen::MatrixXd C0;
  Eigen::MatrixXd C1;
  std::optional<double> alpha;
};

Projection solve_manifold(const TraceObjective& objective, int dprime, const SolverConfig& cfg);

/// Top-dprime eigenvectors of the symmetrized A (descending) and their eigenvalue sum.
struct TopEigen {
  Eigen::MatrixXd vectors;
  double value_sum = 0.0;
};
TopEigen top_eigenvectors(const Eigen::MatrixXd& A, int dprime);

/// Sum over columns of the variance of squared loadings.
double varimax_criterion(const Eigen::MatrixXd& M);

/// Returns M * R for the orthogonal R maximizing varimax_criterion.
Eigen::MatrixXd varimax(const Eigen::MatrixXd& M);

/// Flip columns to a nonnegative sum, then order by maximum entry, descending.
Eigen::MatrixXd canonicalize_axes(const Eigen::MatrixXd& M);

struct ProcrustesResult {
  Eigen::MatrixXd Z_aligned;
  Eigen::MatrixXd R;
  bool degenerate = false;  // Z_new^T Z_prev vanished; R is the identity
};

/// R = argmin ||Z_prev - Z_new R||_F over orthogonal R (reflections allowed).
ProcrustesResult procrustes_align(const Eigen::MatrixXd& Z_prev, const Eigen::MatrixXd& Z_new);

}  // namespace ulca
