#include "ulca/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "ulca/error.hpp"

namespace ulca::csv {
namespace {

std::vector<std::string> split_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  if (quoted) throw Error(Errc::BadData, "unterminated quote on line " + std::to_string(line_no));
  fields.push_back(std::move(field));
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

Dataset parse_dataset(std::string_view text, std::string_view label_column) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    ++line_no;
    if (trim(line).empty()) continue;
    rows.push_back(split_line(trim(line), line_no));
  }
  if (rows.empty()) throw Error(Errc::BadData, "CSV is empty");

  const auto& header = rows.front();
  std::optional<std::size_t> label_idx;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (trim(header[j]) == label_column) label_idx = j;
  }
  if (!label_idx) {
    throw Error(Errc::BadData, "label column '" + std::string(label_column) + "' not in header");
  }

  Dataset data;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != *label_idx) data.attribute_names.emplace_back(trim(header[j]));
  }
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  const auto d = static_cast<Eigen::Index>(data.attribute_names.size());
  data.X.resize(n, d);
  std::vector<std::string> raw_labels;
  raw_labels.reserve(rows.size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& fields = rows[r];
    if (fields.size() != header.size()) {
      throw Error(Errc::BadData, "row " + std::to_string(r) + " has " + std::to_string(fields.size()) +
                                     " fields, header has " + std::to_string(header.size()));
    }
    Eigen::Index a = 0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (j == *label_idx) {
        raw_labels.emplace_back(trim(fields[j]));
        continue;
      }
      const auto v = parse_double(fields[j]);
      if (!v) {
        throw Error(Errc::BadData, "non-numeric value '" + fields[j] + "' in column '" +
                                       data.attribute_names[static_cast<std::size_t>(a)] + "'");
      }
      data.X(static_cast<Eigen::Index>(r - 1), a++) = *v;
    }
  }

  std::vector<std::string> names = raw_labels;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  const bool numeric = std::all_of(names.begin(), names.end(),
                                   [](const std::string& s) { return parse_double(s).has_value(); });
  if (numeric) {
    std::stable_sort(names.begin(), names.end(), [](const std::string& x, const std::string& y) {
      return *parse_double(x) < *parse_double(y);
    });
  }
  std::map<std::string, int> index;
  for (std::size_t j = 0; j < names.size(); ++j) index[names[j]] = static_cast<int>(j);
  data.group_names = names;
  data.labels.reserve(raw_labels.size());
  for (const auto& s : raw_labels) data.labels.push_back(index.at(s));
  data.validate();
  return data;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::BadData, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Dataset read_dataset(const std::filesystem::path& path, std::string_view label_column) {
  return parse_dataset(read_file(path), label_column);
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& values,
                  const std::vector<std::string>& column_names,
                  const std::vector<std::string>& row_names, std::string_view row_header) {
  const bool with_rows = !row_names.empty();
  if (with_rows) out << row_header << ',';
  for (std::size_t j = 0; j < column_names.size(); ++j) out << (j ? "," : "") << column_names[j];
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    if (with_rows) out << row_names[static_cast<std::size_t>(i)] << ',';
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      out << (j ? "," : "") << format_number(values(i, j));
    }
    out << '\n';
  }
}

}  // namespace ulca::csv
