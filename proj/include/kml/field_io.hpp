#pragma once

// Plain-text artifacts: field dumps ("theta1,theta2,value", row-major,
// 17 significant digits) and a stable content hash.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "kml/error.hpp"
#include "kml/torus_grid.hpp"

namespace kml {

/// Malformed or inconsistent artifact content.
class FormatError : public Error {
 public:
  using Error::Error;
};

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
  if (!out) throw UsageError("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string field_csv(const PeriodicField& f) {
  const Grid& g = f.grid();
  std::string out = "theta1,theta2,value\n";
  for (int i = 0; i < g.n1(); ++i)
    for (int j = 0; j < g.n2(); ++j)
      out += format_double(g.theta1(i)) + "," + format_double(g.theta2(j)) + "," + format_double(f(i, j)) + "\n";
  return out;
}

inline void write_field_csv(const std::filesystem::path& path, const PeriodicField& f) { write_text(path, field_csv(f)); }

namespace detail {

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw FormatError(where + ": bad number \"" + s + "\"");
  return x;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// Reads a field dump for the given grid; the coordinates must match the
/// grid nodes.
inline PeriodicField read_field_csv(const std::filesystem::path& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "theta1,theta2,value")
    throw FormatError(path.string() + ": expected header theta1,theta2,value");
  PeriodicField f(grid);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(row + 2);
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 3) throw FormatError(where + ": expected three columns");
    if (row >= grid.size()) throw FormatError(path.string() + ": more rows than grid points");
    const int i = static_cast<int>(row) / grid.n2(), j = static_cast<int>(row) % grid.n2();
    const double t1 = detail::parse_double(cells[0], where), t2 = detail::parse_double(cells[1], where);
    if (std::abs(t1 - grid.theta1(i)) > 1e-12 || std::abs(t2 - grid.theta2(j)) > 1e-12)
      throw FormatError(where + ": coordinates do not match the grid");
    f(i, j) = detail::parse_double(cells[2], where);
    ++row;
  }
  if (row != grid.size()) throw FormatError(path.string() + ": expected " + std::to_string(grid.size()) + " rows");
  return f;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace kml
