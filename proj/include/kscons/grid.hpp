#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kscons {

// Base class of every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Uniform cell-centered lattice over an interval (dim = 1) or a rectangle
// (dim = 2). Axis 0 runs fastest in the linear cell index.
struct Grid {
  int dim = 1;
  std::array<double, 2> extent{1.0, 1.0};
  std::array<int, 2> cells{1, 1};
  std::array<double, 2> spacing{1.0, 1.0};

  static Grid line(double length, int n) { return make(1, {length, 1.0}, {n, 1}); }

  static Grid rectangle(double lx, double ly, int nx, int ny) {
    return make(2, {lx, ly}, {nx, ny});
  }

  static Grid make(int dim, std::array<double, 2> extent, std::array<int, 2> cells) {
    if (dim != 1 && dim != 2) throw Error("grid dimension must be 1 or 2");
    if (dim == 1) {
      extent[1] = 1.0;
      cells[1] = 1;
    }
    Grid g;
    g.dim = dim;
    for (int k = 0; k < 2; ++k) {
      if (!(extent[k] > 0.0) || !std::isfinite(extent[k]))
        throw Error("grid extent must be positive and finite");
      if (cells[k] < 1) throw Error("grid cell count must be positive");
      g.extent[k] = extent[k];
      g.cells[k] = cells[k];
      g.spacing[k] = extent[k] / cells[k];
    }
    return g;
  }

  std::size_t size() const {
    return static_cast<std::size_t>(cells[0]) * static_cast<std::size_t>(cells[1]);
  }
  double cell_volume() const { return dim == 1 ? spacing[0] : spacing[0] * spacing[1]; }
  double volume() const { return dim == 1 ? extent[0] : extent[0] * extent[1]; }
  double min_spacing() const { return dim == 1 ? spacing[0] : std::min(spacing[0], spacing[1]); }
  double center(int axis, int i) const { return (i + 0.5) * spacing[axis]; }
  std::size_t index(int i, int j = 0) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(cells[0]) * static_cast<std::size_t>(j);
  }

  // Same dimension with every axis refined by `factor`.
  Grid refined(int factor) const {
    return make(dim, extent, {cells[0] * factor, dim == 1 ? 1 : cells[1] * factor});
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

// Cell-average values over a Grid.
class Field {
 public:
  Field() = default;
  explicit Field(const Grid& g, double value = 0.0) : grid_(g), values_(g.size(), value) {}
  Field(const Grid& g, std::vector<double> values) : grid_(g), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw Error("field size does not match grid");
  }

  // Samples f at cell centers: f(x) in 1D, f(x, y) in 2D.
  template <class F>
  static Field from_function(const Grid& g, F&& f) {
    Field out(g);
    for (int j = 0; j < g.cells[1]; ++j) {
      for (int i = 0; i < g.cells[0]; ++i) {
        const double x = g.center(0, i);
        if constexpr (std::is_invocable_v<F, double, double>) {
          out[g.index(i, j)] = f(x, g.center(1, j));
        } else {
          out[g.index(i, j)] = f(x);
        }
      }
    }
    return out;
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }

  // Nonnegative up to round-off.
  bool is_nonnegative(double slack = 1e-14) const { return min() >= -slack; }
  bool is_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
  }

  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t k = 0; k < size(); ++k) values_[k] += o.values_[k];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t k = 0; k < size(); ++k) values_[k] -= o.values_[k];
    return *this;
  }
  Field& operator*=(double a) {
    for (double& x : values_) x *= a;
    return *this;
  }
  Field& operator+=(double a) {
    for (double& x : values_) x += a;
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }
  friend Field operator*(Field a, double s) { return a *= s; }
  friend Field operator-(Field a, double c) { return a += -c; }
  friend Field operator+(Field a, double c) { return a += c; }

  // Pointwise product.
  friend Field hadamard(const Field& a, const Field& b) {
    a.check_same(b);
    Field out(a.grid_);
    for (std::size_t k = 0; k < a.size(); ++k) out.values_[k] = a.values_[k] * b.values_[k];
    return out;
  }

  friend bool operator==(const Field&, const Field&) = default;

 private:
  void check_same(const Field& o) const {
    if (!(grid_ == o.grid_)) throw Error("fields live on different grids");
  }

  Grid grid_;
  std::vector<double> values_;
};

// Discrete Neumann Laplacian in flux form: face fluxes (f_R - f_L)/h, zero on
// the boundary, then divided differences of the fluxes. The volume-weighted
// sum of the output telescopes to zero.
inline void laplacian_neumann(const Field& f, Field& out) {
  const Grid& g = f.grid();
  if (!(out.grid() == g)) out = Field(g);
  const int nx = g.cells[0];
  const int ny = g.cells[1];
  const double hx = g.spacing[0];
  for (int j = 0; j < ny; ++j) {
    const std::size_t row = g.index(0, j);
    double left_flux = 0.0;
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = row + static_cast<std::size_t>(i);
      const double right_flux = (i + 1 < nx) ? (f[k + 1] - f[k]) / hx : 0.0;
      out[k] = (right_flux - left_flux) / hx;
      left_flux = right_flux;
    }
  }
  if (g.dim == 2) {
    const double hy = g.spacing[1];
    const std::size_t stride = static_cast<std::size_t>(nx);
    for (int i = 0; i < nx; ++i) {
      double lower_flux = 0.0;
      for (int j = 0; j < ny; ++j) {
        const std::size_t k = g.index(i, j);
        const double upper_flux = (j + 1 < ny) ? (f[k + stride] - f[k]) / hy : 0.0;
        out[k] += (upper_flux - lower_flux) / hy;
        lower_flux = upper_flux;
      }
    }
  }
}

inline Field laplacian_neumann(const Field& f) {
  Field out(f.grid());
  laplacian_neumann(f, out);
  return out;
}

// Midpoint-rule integral over the domain, fixed summation order.
inline double integrate(const Field& f) {
  double sum = 0.0;
  for (double x : f) sum += x;
  return sum * f.grid().cell_volume();
}

inline double mean(const Field& f) { return integrate(f) / f.grid().volume(); }

// Volume-weighted inner product.
inline double inner(const Field& a, const Field& b) {
  if (!(a.grid() == b.grid())) throw Error("fields live on different grids");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
  return sum * a.grid().cell_volume();
}

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline double lp_norm(const Field& f, double p) {
  if (std::isnan(p) || p < 1.0) throw std::invalid_argument("lp_norm requires p >= 1, got " + std::to_string(p));
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : f) m = std::max(m, std::abs(x));
    return m;
  }
  double sum = 0.0;
  if (p == 1.0) {
    for (double x : f) sum += std::abs(x);
    return sum * f.grid().cell_volume();
  }
  if (p == 2.0) {
    for (double x : f) sum += x * x;
    return std::sqrt(sum * f.grid().cell_volume());
  }
  for (double x : f) sum += std::pow(std::abs(x), p);
  return std::pow(sum * f.grid().cell_volume(), 1.0 / p);
}

// Sum over interior faces of ((f_R - f_L)/h)^2 times the cell volume. Pairs
// with laplacian_neumann by summation by parts:
//   grad_sq_norm(f) == -integrate(f * laplacian_neumann(f)).
inline double grad_sq_norm(const Field& f) {
  const Grid& g = f.grid();
  const int nx = g.cells[0];
  const int ny = g.cells[1];
  double sum = 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const std::size_t k = g.index(i, j);
      const double d = (f[k + 1] - f[k]) / g.spacing[0];
      sum += d * d;
    }
  }
  if (g.dim == 2) {
    const std::size_t stride = static_cast<std::size_t>(nx);
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t k = g.index(i, j);
        const double d = (f[k + stride] - f[k]) / g.spacing[1];
        sum += d * d;
      }
    }
  }
  return sum * g.cell_volume();
}

// Averages each block of factor^dim fine cells onto the coarse grid.
inline Field restrict_to(const Field& fine, const Grid& coarse) {
  const Grid& g = fine.grid();
  if (g.dim != coarse.dim) throw Error("restriction between grids of different dimension");
  const int fx = g.cells[0] / coarse.cells[0];
  const int fy = g.cells[1] / coarse.cells[1];
  if (fx * coarse.cells[0] != g.cells[0] || fy * coarse.cells[1] != g.cells[1])
    throw Error("fine grid is not an integer refinement of the coarse grid");
  Field out(coarse);
  const double w = 1.0 / (fx * fy);
  for (int j = 0; j < coarse.cells[1]; ++j)
    for (int i = 0; i < coarse.cells[0]; ++i) {
      double s = 0.0;
      for (int b = 0; b < fy; ++b)
        for (int a = 0; a < fx; ++a) s += fine[g.index(i * fx + a, j * fy + b)];
      out[coarse.index(i, j)] = s * w;
    }
  return out;
}

}  // namespace kscons
