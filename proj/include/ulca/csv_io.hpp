#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ulca/dataset.hpp"

namespace ulca::csv {

/// Parses a headered CSV (UTF-8, '.' decimal point, optional double quotes).
/// `label_column` names the group column; every other column must be numeric.
/// Groups are ordered numerically when every label parses as a number,
/// lexicographically otherwise. Throws Error(BadData) on malformed input.
Dataset parse_dataset(std::string_view text, std::string_view label_column);
Dataset read_dataset(const std::filesystem::path& path, std::string_view label_column);

std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_number(double value);

/// Header line then one line per row; `row_names`, when given, prefixes each
/// row under the `row_header` column.
void write_matrix(std::ostream& out, const Eigen::MatrixXd& values,
                  const std::vector<std::string>& column_names,
                  const std::vector<std::string>& row_names = {},
                  std::string_view row_header = "attribute");

}  // namespace ulca::csv
