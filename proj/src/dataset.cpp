#include "ulca/dataset.hpp"

#include <cmath>
#include <cstring>

#include "ulca/error.hpp"

namespace ulca {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "INVALID_ARGUMENT";
    case Errc::DimensionMismatch: return "DIMENSION_MISMATCH";
    case Errc::EmptyGroup: return "EMPTY_GROUP";
    case Errc::NonFiniteInput: return "NON_FINITE_INPUT";
    case Errc::BadData: return "BAD_DATA";
    case Errc::EigenFailure: return "EIGEN_FAILURE";
    case Errc::SingularDenominator: return "SINGULAR_DENOMINATOR";
    case Errc::ZeroVector: return "ZERO_VECTOR";
    case Errc::NonPositiveArea: return "NON_POSITIVE_AREA";
    case Errc::UnknownSnapshot: return "UNKNOWN_SNAPSHOT";
    case Errc::DuplicateName: return "DUPLICATE_NAME";
    case Errc::DatasetMismatch: return "DATASET_MISMATCH";
    case Errc::NoDataset: return "NO_DATASET";
    case Errc::Cancelled: return "CANCELLED";
    case Errc::BadMessage: return "BAD_MESSAGE";
    case Errc::PortInUse: return "PORT_IN_USE";
  }
  return "UNKNOWN";
}

std::vector<int> group_counts(const std::vector<int>& labels, int num_groups) {
  std::vector<int> counts(static_cast<std::size_t>(num_groups), 0);
  for (int y : labels) {
    if (y < 0 || y >= num_groups) {
      throw Error(Errc::InvalidArgument, "label " + std::to_string(y) + " outside [0, " +
                                             std::to_string(num_groups) + ")");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

void Dataset::validate() const {
  const auto n = X.rows();
  const auto d = X.cols();
  if (n < 2 || d < 2) {
    throw Error(Errc::BadData, "dataset needs at least 2 rows and 2 attributes");
  }
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw Error(Errc::DimensionMismatch, "label count does not match row count");
  }
  if (static_cast<Eigen::Index>(attribute_names.size()) != d) {
    throw Error(Errc::DimensionMismatch, "attribute name count does not match column count");
  }
  if (group_names.empty()) throw Error(Errc::BadData, "dataset has no groups");
  const auto counts = group_counts(labels, num_groups());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0) throw Error(Errc::EmptyGroup, "group '" + group_names[j] + "' has no members");
  }
  if (!X.allFinite()) throw Error(Errc::NonFiniteInput, "dataset contains NaN or infinite values");
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  const std::int64_t shape[2] = {X.rows(), X.cols()};
  mix(shape, sizeof shape);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double v = X(i, j);
      mix(&v, sizeof v);
    }
  }
  for (int y : labels) {
    const std::int32_t v = y;
    mix(&v, sizeof v);
  }
  return h;
}

Dataset standardize(const Dataset& data) {
  Dataset out = data;
  const double n = static_cast<double>(data.rows());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    auto col = out.X.col(j);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (sd > 0.0) col /= sd;
  }
  return out;
}

}  // namespace ulca
