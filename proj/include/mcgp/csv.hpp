#pragma once

// Plain numeric CSV: no quoting, optional single header line, doubles written
// with 17 significant digits so they read back bit-for-bit.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "mcgp/error.hpp"

namespace mcgp::csv {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class Derived>
void write(const std::filesystem::path& path, const Eigen::DenseBase<Derived>& m,
           const std::vector<std::string>& header = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      if constexpr (std::is_floating_point_v<typename Derived::Scalar>) out << format_double(m(r, c));
      else out << m(r, c);
    }
    out << '\n';
  }
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

namespace detail {

inline bool parse_double(std::string_view s, double& v) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Reads a rectangular numeric table. A first line that does not parse as
/// numbers is taken as a header. Ragged rows or bad fields throw
/// ValidationError naming the file and line.
inline Eigen::MatrixXd read(const std::filesystem::path& path, std::vector<std::string>* header = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<double> values;
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split(line);
    std::vector<double> row(fields.size());
    bool ok = true;
    for (std::size_t c = 0; c < fields.size() && ok; ++c) ok = detail::parse_double(fields[c], row[c]);
    if (!ok) {
      if (rows == 0 && cols < 0) {
        if (header)
          for (auto f : fields) header->emplace_back(f);
        cols = static_cast<Eigen::Index>(fields.size());
        continue;
      }
      throw ValidationError(path.filename().string() + ": line " + std::to_string(lineno) + " has a non-numeric field");
    }
    if (cols >= 0 && static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(path.filename().string() + ": line " + std::to_string(lineno) + " has " +
                            std::to_string(row.size()) + " fields, expected " + std::to_string(cols));
    cols = static_cast<Eigen::Index>(row.size());
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  Eigen::MatrixXd m(rows, rows ? cols : 0);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace mcgp::csv
