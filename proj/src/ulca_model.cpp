#include "ulca/ulca_model.hpp"

#include <cmath>

#include "ulca/error.hpp"
#include "ulca/kernels.hpp"

namespace ulca {
namespace {

void check_weights(const Eigen::VectorXd& w, int c, const char* name) {
  if (w.size() != c) {
    throw Error(Errc::DimensionMismatch, std::string(name) + " has " + std::to_string(w.size()) +
                                             " entries for " + std::to_string(c) + " groups");
  }
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (!(w(j) >= 0.0 && w(j) <= 1.0)) {
      throw Error(Errc::InvalidArgument, std::string(name) + " entries must lie in [0, 1]");
    }
  }
}

void check_group(int group, int num_groups) {
  if (group < 0 || group >= num_groups) {
    throw Error(Errc::InvalidArgument, "group index " + std::to_string(group) + " out of range");
  }
}

}  // namespace

void UlcaParams::validate(int num_groups, Eigen::Index dim) const {
  check_weights(w_tg, num_groups, "w_tg");
  check_weights(w_bg, num_groups, "w_bg");
  check_weights(w_bw, num_groups, "w_bw");
  if (alpha && !(*alpha >= 0.0 && std::isfinite(*alpha))) {
    throw Error(Errc::InvalidArgument, "alpha must be a finite nonnegative number");
  }
  if (!(gamma0 >= 0.0) || !(gamma1 >= 0.0) || !std::isfinite(gamma0) || !std::isfinite(gamma1)) {
    throw Error(Errc::InvalidArgument, "gamma0 and gamma1 must be finite and nonnegative");
  }
  if (dprime < 1 || dprime > dim) {
    throw Error(Errc::DimensionMismatch, "dprime " + std::to_string(dprime) + " outside [1, " +
                                             std::to_string(dim) + "]");
  }
}

bool UlcaParams::operator==(const UlcaParams& other) const {
  return w_tg == other.w_tg && w_bg == other.w_bg && w_bw == other.w_bw && alpha == other.alpha &&
         gamma0 == other.gamma0 && gamma1 == other.gamma1 && dprime == other.dprime;
}

namespace presets {

UlcaParams pca(int num_groups, int group, int dprime) {
  check_group(group, num_groups);
  UlcaParams p;
  p.w_tg = Eigen::VectorXd::Zero(num_groups);
  p.w_tg(group) = 1.0;
  p.w_bg = Eigen::VectorXd::Zero(num_groups);
  p.w_bw = Eigen::VectorXd::Zero(num_groups);
  p.dprime = dprime;
  return p;
}

UlcaParams cpca(int num_groups, int target, const std::vector<int>& background,
                std::optional<double> alpha, int dprime) {
  check_group(target, num_groups);
  UlcaParams p = pca(num_groups, target, dprime);
  for (int j : background) {
    check_group(j, num_groups);
    p.w_bg(j) = 1.0;
  }
  p.alpha = alpha;
  return p;
}

UlcaParams ccpca(int num_groups, int target, std::optional<double> alpha, int dprime) {
  check_group(target, num_groups);
  UlcaParams p;
  p.w_tg = Eigen::VectorXd::Ones(num_groups);
  p.w_bg = Eigen::VectorXd::Ones(num_groups);
  p.w_bg(target) = 0.0;
  p.w_bw = Eigen::VectorXd::Zero(num_groups);
  p.alpha = alpha;
  p.dprime = dprime;
  return p;
}

UlcaParams lda(int num_groups, int dprime) {
  UlcaParams p;
  p.w_tg = Eigen::VectorXd::Zero(num_groups);
  p.w_bg = Eigen::VectorXd::Ones(num_groups);
  p.w_bw = Eigen::VectorXd::Ones(num_groups);
  p.dprime = dprime;
  return p;
}

UlcaParams lda_count_weighted(const GroupStats& stats, int dprime) {
  UlcaParams p = lda(stats.num_groups(), dprime);
  const double n = stats.total_count();
  for (int j = 0; j < stats.num_groups(); ++j) {
    const double w = stats.n_j[static_cast<std::size_t>(j)] / n;
    p.w_bg(j) = w;
    p.w_bw(j) = w;
  }
  return p;
}

}  // namespace presets

AssembledMatrices assemble_c0_c1(const GroupStats& stats, const UlcaParams& params) {
  const int c = stats.num_groups();
  const auto d = stats.dim();
  params.validate(c, d);

  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd background = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < c; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    if (params.w_tg(j) != 0.0) target += params.w_tg(j) * stats.C_wi[jj];
    if (params.w_bw(j) != 0.0) target += params.w_bw(j) * stats.C_bw[jj];
    if (params.w_bg(j) != 0.0) background += params.w_bg(j) * stats.C_wi[jj];
  }

  const double zero_tol = 1e-14 * stats.scale();
  auto vanishes = [zero_tol](const Eigen::MatrixXd& m) {
    return m.cwiseAbs().maxCoeff() < zero_tol;
  };

  AssembledMatrices out;
  out.gamma0_eff = (params.gamma0 == 0.0 && vanishes(target)) ? 1.0 : params.gamma0;
  out.gamma1_eff = (params.gamma1 == 0.0 && vanishes(background)) ? 1.0 : params.gamma1;
  out.C0 = std::move(target);
  out.C0.diagonal().array() += out.gamma0_eff;
  out.C1 = std::move(background);
  out.C1.diagonal().array() += out.gamma1_eff;
  return out;
}

Projection solve_projection(const GroupStats& stats, const UlcaParams& params,
                            const SolverConfig& cfg, AssembledMatrices* assembled) {
  AssembledMatrices mats = assemble_c0_c1(stats, params);
  Projection proj = params.alpha
                        ? solve_trace_difference(mats.C0 - *params.alpha * mats.C1, params.dprime, cfg)
                        : solve_trace_ratio(mats.C0, mats.C1, params.dprime, cfg);
  if (params.alpha) proj.alpha_used = *params.alpha;
  if (cfg.apply_varimax) proj.M = varimax(proj.M);
  proj.M = canonicalize_axes(proj.M);
  if (assembled) *assembled = std::move(mats);
  return proj;
}

UlcaFit fit(const Dataset& data, const GroupStats& stats, const UlcaParams& params,
            const SolverConfig& cfg) {
  if (stats.dim() != data.cols() || stats.num_groups() != data.num_groups()) {
    throw Error(Errc::DimensionMismatch, "group statistics do not belong to this dataset");
  }
  AssembledMatrices mats;
  UlcaFit out;
  out.projection = solve_projection(stats, params, cfg, &mats);
  out.params_used = params;
  out.params_used.gamma0 = mats.gamma0_eff;
  out.params_used.gamma1 = mats.gamma1_eff;
  out.ratio_mode = !params.alpha.has_value();
  out.embedding = kernels::project(data.X, out.projection.M);
  return out;
}

UlcaFit fit(const Dataset& data, const UlcaParams& params, const SolverConfig& cfg) {
  return fit(data, compute_group_stats(data), params, cfg);
}

Eigen::MatrixXd transform(const Eigen::MatrixXd& M, const Eigen::MatrixXd& X_new) {
  return kernels::project(X_new, M);
}

Eigen::VectorXd project_axis(const Eigen::MatrixXd& M, const Eigen::VectorXd& v) {
  if (v.size() != M.cols()) {
    throw Error(Errc::DimensionMismatch, "axis vector length does not match embedding dimension");
  }
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw Error(Errc::ZeroVector, "axis vector has zero length");
  return M * v / norm;
}

}  // namespace ulca
