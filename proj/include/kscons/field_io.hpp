#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "kscons/grid.hpp"

namespace kscons {

// Doubles are written with 17 significant digits so they round-trip exactly.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Snapshot layout:
//   # dim,extent,cells
//   # <dim>,<extent per axis joined by 'x'>,<cells per axis joined by 'x'>
//   index,x[,y],value      (one row per cell)
inline void write_snapshot(std::ostream& os, const Field& f) {
  const Grid& g = f.grid();
  os << "# dim,extent,cells\n";
  os << "# " << g.dim << ',' << format_double(g.extent[0]);
  if (g.dim == 2) os << 'x' << format_double(g.extent[1]);
  os << ',' << g.cells[0];
  if (g.dim == 2) os << 'x' << g.cells[1];
  os << '\n';
  for (int j = 0; j < g.cells[1]; ++j) {
    for (int i = 0; i < g.cells[0]; ++i) {
      const std::size_t k = g.index(i, j);
      os << k << ',' << format_double(g.center(0, i));
      if (g.dim == 2) os << ',' << format_double(g.center(1, j));
      os << ',' << format_double(f[k]) << '\n';
    }
  }
}

inline void write_snapshot(const std::string& path, const Field& f) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open snapshot file for writing: " + path);
  write_snapshot(os, f);
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  return parts;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw Error("malformed number '" + s + "' in " + what);
  }
}

}  // namespace detail

inline Field read_snapshot(std::istream& is, const std::string& name = "snapshot") {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# dim,extent,cells", 0) != 0)
    throw Error(name + ": missing '# dim,extent,cells' header");
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0)
    throw Error(name + ": missing grid metadata line");
  const auto meta = detail::split(line.substr(2), ',');
  if (meta.size() != 3) throw Error(name + ": grid metadata must have 3 entries");
  const int dim = std::stoi(meta[0]);
  const auto ext = detail::split(meta[1], 'x');
  const auto cel = detail::split(meta[2], 'x');
  if (static_cast<int>(ext.size()) != dim || static_cast<int>(cel.size()) != dim)
    throw Error(name + ": extent/cells entries do not match dim");
  std::array<double, 2> extent{1.0, 1.0};
  std::array<int, 2> cells{1, 1};
  for (int k = 0; k < dim; ++k) {
    extent[k] = detail::parse_double(ext[k], name);
    cells[k] = std::stoi(cel[k]);
  }
  Grid g = Grid::make(dim, extent, cells);
  Field f(g);
  std::vector<bool> seen(g.size(), false);
  std::size_t rows = 0;
  int lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = detail::split(line, ',');
    if (static_cast<int>(cols.size()) != dim + 2)
      throw Error(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim + 2) + " columns");
    const long idx = std::stol(cols[0]);
    if (idx < 0 || static_cast<std::size_t>(idx) >= g.size() || seen[idx])
      throw Error(name + ":" + std::to_string(lineno) + ": bad or repeated cell index");
    seen[idx] = true;
    f[idx] = detail::parse_double(cols.back(), name + ":" + std::to_string(lineno));
    ++rows;
  }
  if (rows != g.size()) throw Error(name + ": expected " + std::to_string(g.size()) + " rows, got " + std::to_string(rows));
  return f;
}

inline Field read_snapshot(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open snapshot file: " + path);
  return read_snapshot(is, path);
}

}  // namespace kscons
