#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ulca {

enum class Errc {
  InvalidArgument,
  DimensionMismatch,
  EmptyGroup,
  NonFiniteInput,
  BadData,
  EigenFailure,
  SingularDenominator,
  ZeroVector,
  NonPositiveArea,
  UnknownSnapshot,
  DuplicateName,
  DatasetMismatch,
  NoDataset,
  Cancelled,
  BadMessage,
  PortInUse,
};

/// Stable upper-case code used on the wire and in CLI diagnostics.
std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ulca
