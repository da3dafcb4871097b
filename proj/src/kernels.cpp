#include "ulca/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ulca/error.hpp"

namespace ulca::kernels {
namespace {

constexpr Eigen::Index kMinChunkRows = 512;
constexpr Eigen::Index kMaxChunks = 64;

Eigen::Index chunk_rows(Eigen::Index n) {
  return std::max(kMinChunkRows, (n + kMaxChunks - 1) / kMaxChunks);
}

void check_labels(const Eigen::MatrixXd& X, std::span<const int> labels, int num_groups) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) {
    throw Error(Errc::DimensionMismatch, "label count does not match row count");
  }
  if (num_groups < 1) throw Error(Errc::InvalidArgument, "need at least one group");
  for (int y : labels) {
    if (y < 0 || y >= num_groups) throw Error(Errc::InvalidArgument, "label out of range");
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

GroupMoments group_moments(const Eigen::MatrixXd& X, std::span<const int> labels, int num_groups) {
  check_labels(X, labels, num_groups);
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const auto c = static_cast<std::size_t>(num_groups);
  const Eigen::Index step = chunk_rows(n);
  const Eigen::Index num_chunks = (n + step - 1) / step;

  GroupMoments out;
  out.counts.assign(c, 0);
  for (int y : labels) ++out.counts[static_cast<std::size_t>(y)];

  // Pass 1: group sums per chunk.
  std::vector<Eigen::MatrixXd> partial_sums(static_cast<std::size_t>(num_chunks));
#pragma omp parallel for schedule(static)
  for (Eigen::Index chunk = 0; chunk < num_chunks; ++chunk) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c), d);
    const Eigen::Index end = std::min(n, (chunk + 1) * step);
    for (Eigen::Index i = chunk * step; i < end; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += X.row(i);
    }
    partial_sums[static_cast<std::size_t>(chunk)] = std::move(sums);
  }
  out.means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c), d);
  for (const auto& s : partial_sums) out.means += s;
  for (std::size_t j = 0; j < c; ++j) {
    if (out.counts[j] > 0) out.means.row(static_cast<Eigen::Index>(j)) /= out.counts[j];
  }

  // Pass 2: centered scatter per chunk, BLAS-3 rank updates on gathered rows.
  std::vector<std::vector<Eigen::MatrixXd>> partial_scatter(static_cast<std::size_t>(num_chunks));
#pragma omp parallel for schedule(static)
  for (Eigen::Index chunk = 0; chunk < num_chunks; ++chunk) {
    const Eigen::Index begin = chunk * step;
    const Eigen::Index end = std::min(n, begin + step);
    std::vector<Eigen::Index> fill(c, 0);
    for (Eigen::Index i = begin; i < end; ++i) ++fill[static_cast<std::size_t>(labels[i])];
    std::vector<Eigen::MatrixXd> centered(c);
    for (std::size_t j = 0; j < c; ++j) centered[j].resize(fill[j], d);
    std::fill(fill.begin(), fill.end(), 0);
    for (Eigen::Index i = begin; i < end; ++i) {
      const auto j = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
      centered[j].row(fill[j]++) = X.row(i) - out.means.row(static_cast<Eigen::Index>(j));
    }
    auto& scatter = partial_scatter[static_cast<std::size_t>(chunk)];
    scatter.resize(c);
    for (std::size_t j = 0; j < c; ++j) {
      scatter[j] = Eigen::MatrixXd::Zero(d, d);
      if (centered[j].rows() > 0) {
        scatter[j].selfadjointView<Eigen::Lower>().rankUpdate(centered[j].transpose());
      }
    }
  }

  out.covariances.assign(c, Eigen::MatrixXd::Zero(d, d));
  for (const auto& chunk : partial_scatter) {
    for (std::size_t j = 0; j < c; ++j) out.covariances[j] += chunk[j];
  }
  for (std::size_t j = 0; j < c; ++j) {
    auto& cov = out.covariances[j];
    cov = cov.selfadjointView<Eigen::Lower>();
    if (out.counts[j] > 0) cov /= out.counts[j];
  }
  return out;
}

GroupMoments group_moments_serial(const Eigen::MatrixXd& X, std::span<const int> labels,
                                  int num_groups) {
  check_labels(X, labels, num_groups);
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const auto c = static_cast<std::size_t>(num_groups);

  GroupMoments out;
  out.counts.assign(c, 0);
  out.means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c), d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int j = labels[static_cast<std::size_t>(i)];
    ++out.counts[static_cast<std::size_t>(j)];
    for (Eigen::Index a = 0; a < d; ++a) out.means(j, a) += X(i, a);
  }
  for (std::size_t j = 0; j < c; ++j) {
    for (Eigen::Index a = 0; a < d; ++a) {
      if (out.counts[j] > 0) out.means(static_cast<Eigen::Index>(j), a) /= out.counts[j];
    }
  }

  out.covariances.assign(c, Eigen::MatrixXd::Zero(d, d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int j = labels[static_cast<std::size_t>(i)];
    auto& cov = out.covariances[static_cast<std::size_t>(j)];
    for (Eigen::Index a = 0; a < d; ++a) {
      const double da = X(i, a) - out.means(j, a);
      for (Eigen::Index b = 0; b < d; ++b) cov(a, b) += da * (X(i, b) - out.means(j, b));
    }
  }
  for (std::size_t j = 0; j < c; ++j) {
    if (out.counts[j] > 0) out.covariances[j] /= out.counts[j];
  }
  return out;
}

Eigen::MatrixXd project(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M) {
  if (X.cols() != M.rows()) {
    throw Error(Errc::DimensionMismatch, "projection has " + std::to_string(M.rows()) +
                                             " rows but data has " + std::to_string(X.cols()) +
                                             " columns");
  }
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd Z(n, M.cols());
  const Eigen::Index step = chunk_rows(n);
  const Eigen::Index num_chunks = (n + step - 1) / step;
#pragma omp parallel for schedule(static)
  for (Eigen::Index chunk = 0; chunk < num_chunks; ++chunk) {
    const Eigen::Index begin = chunk * step;
    const Eigen::Index rows = std::min(n, begin + step) - begin;
    Z.middleRows(begin, rows).noalias() = X.middleRows(begin, rows) * M;
  }
  return Z;
}

Eigen::MatrixXd project_serial(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M) {
  if (X.cols() != M.rows()) throw Error(Errc::DimensionMismatch, "projection shape mismatch");
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(X.rows(), M.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index k = 0; k < M.cols(); ++k) {
      double acc = 0.0;
      for (Eigen::Index a = 0; a < X.cols(); ++a) acc += X(i, a) * M(a, k);
      Z(i, k) = acc;
    }
  }
  return Z;
}

}  // namespace ulca::kernels
