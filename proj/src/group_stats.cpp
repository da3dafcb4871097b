#include "ulca/group_stats.hpp"

#include <numeric>

#include "ulca/kernels.hpp"

namespace ulca {

int GroupStats::total_count() const { return std::accumulate(n_j.begin(), n_j.end(), 0); }

double GroupStats::scale() const {
  double s = 0.0;
  for (const auto& c : C_wi) s = std::max(s, c.cwiseAbs().maxCoeff());
  for (const auto& c : C_bw) s = std::max(s, c.cwiseAbs().maxCoeff());
  return s > 0.0 ? s : 1.0;
}

GroupStats compute_group_stats(const Dataset& data) {
  data.validate();
  auto moments = kernels::group_moments(data.X, data.labels, data.num_groups());

  GroupStats stats;
  stats.n_j = std::move(moments.counts);
  stats.mu_j = std::move(moments.means);
  stats.C_wi = std::move(moments.covariances);

  const double n = static_cast<double>(data.rows());
  stats.mu = Eigen::VectorXd::Zero(data.cols());
  for (int j = 0; j < stats.num_groups(); ++j) {
    stats.mu += (stats.n_j[static_cast<std::size_t>(j)] / n) * stats.mu_j.row(j).transpose();
  }
  stats.C_bw.reserve(stats.n_j.size());
  for (int j = 0; j < stats.num_groups(); ++j) {
    const Eigen::VectorXd diff = stats.mu_j.row(j).transpose() - stats.mu;
    stats.C_bw.push_back(diff * diff.transpose());
  }
  return stats;
}

}  // namespace ulca
