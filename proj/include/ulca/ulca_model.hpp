#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ulca/dataset.hpp"
#include "ulca/group_stats.hpp"
#include "ulca/solvers.hpp"

namespace ulca {

/// Weights and regularizers of the unified objective
///   max tr(M^T C0 M) / tr(M^T C1 M)            (alpha unset: trace-ratio mode)
///   max tr(M^T (C0 - alpha C1) M)              (alpha set: relaxed mode)
/// with C0 = sum w_tg C_wi + sum w_bw C_bw + gamma0 I and C1 = sum w_bg C_wi + gamma1 I.
struct UlcaParams {
  Eigen::VectorXd w_tg;
  Eigen::VectorXd w_bg;
  Eigen::VectorXd w_bw;
  std::optional<double> alpha;
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  int dprime = 2;

  int num_groups() const { return static_cast<int>(w_tg.size()); }
  void validate(int num_groups, Eigen::Index dim) const;

  bool operator==(const UlcaParams& other) const;
};

namespace presets {

/// Variance of one group only.
UlcaParams pca(int num_groups, int group, int dprime = 2);
/// Target group against background groups, relaxed with the given alpha (trace-ratio when unset).
UlcaParams cpca(int num_groups, int target, const std::vector<int>& background,
                std::optional<double> alpha, int dprime = 2);
/// Every group as target, every group except `target` as background.
UlcaParams ccpca(int num_groups, int target, std::optional<double> alpha, int dprime = 2);
/// Between-class over within-class, unit weights.
UlcaParams lda(int num_groups, int dprime = 2);
/// LDA with count weights n_j / n, reproducing the pooled scatter-matrix form exactly.
UlcaParams lda_count_weighted(const GroupStats& stats, int dprime = 2);

}  // namespace presets

struct AssembledMatrices {
  Eigen::MatrixXd C0;
  Eigen::MatrixXd C1;
  double gamma0_eff = 0.0;
  double gamma1_eff = 0.0;
};

/// Weighted sums plus regularizers; a gamma left at 0 is forced to 1 when its
/// weighted sum vanishes (max |entry| < 1e-14 * stats.scale()).
AssembledMatrices assemble_c0_c1(const GroupStats& stats, const UlcaParams& params);

struct UlcaFit {
  Projection projection;
  UlcaParams params_used;  // gammas resolved; alpha as requested
  bool ratio_mode = true;
  Eigen::MatrixXd embedding;  // Z = X M
};

/// Solve, then varimax-rotate (when cfg.apply_varimax) and canonicalize M.
UlcaFit fit(const Dataset& data, const GroupStats& stats, const UlcaParams& params,
            const SolverConfig& cfg);
UlcaFit fit(const Dataset& data, const UlcaParams& params, const SolverConfig& cfg);

/// Only the projection; skips the embedding product.
Projection solve_projection(const GroupStats& stats, const UlcaParams& params,
                            const SolverConfig& cfg, AssembledMatrices* assembled = nullptr);

Eigen::MatrixXd transform(const Eigen::MatrixXd& M, const Eigen::MatrixXd& X_new);
inline Eigen::MatrixXd transform(const UlcaFit& f, const Eigen::MatrixXd& X_new) {
  return transform(f.projection.M, X_new);
}

/// Attribute loadings of a drawn axis: M v / ||v||.
Eigen::VectorXd project_axis(const Eigen::MatrixXd& M, const Eigen::VectorXd& v);
inline Eigen::VectorXd project_axis(const UlcaFit& f, const Eigen::VectorXd& v) {
  return project_axis(f.projection.M, v);
}

}  // namespace ulca
