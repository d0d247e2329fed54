#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "kscons/grid.hpp"

namespace kscons {

// Thrown when an iterative solve stops before reaching its tolerance.
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& what, double residual, int iterations)
      : Error(what + ": residual " + std::to_string(residual) + " after " + std::to_string(iterations) +
              " iterations"),
        residual_(residual),
        iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

struct CgResult {
  int iterations = 0;
  double residual_norm = 0.0;  // volume-weighted L2 norm of b - A x
  bool converged = false;
};

inline void project_mean_zero(Field& f) {
  const double m = mean(f);
  for (double& x : f) x -= m;
}

// Preconditioned conjugate gradients for a symmetric positive definite
// operator in the volume-weighted inner product. `x` holds the initial guess
// on entry. With `mean_zero` the iterates, residuals and search directions are
// re-projected onto the mean-zero subspace every iteration.
template <class Apply>
CgResult conjugate_gradient(Apply&& apply, const Field& b, Field& x, double abs_tol, int max_iterations,
                            const Field* inv_diag = nullptr, bool mean_zero = false) {
  const Grid& g = b.grid();
  if (!(x.grid() == g)) x = Field(g);
  if (mean_zero) project_mean_zero(x);
  Field ax(g), r(g), z(g), p(g), ap(g);
  apply(x, ax);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = b[k] - ax[k];
  if (mean_zero) project_mean_zero(r);

  auto precondition = [&](const Field& in, Field& out) {
    if (inv_diag) {
      for (std::size_t k = 0; k < in.size(); ++k) out[k] = (*inv_diag)[k] * in[k];
    } else {
      out = in;
    }
    if (mean_zero) project_mean_zero(out);
  };

  CgResult res;
  res.residual_norm = std::sqrt(inner(r, r));
  if (res.residual_norm <= abs_tol) {
    res.converged = true;
    return res;
  }
  precondition(r, z);
  p = z;
  double rz = inner(r, z);
  for (int it = 1; it <= max_iterations; ++it) {
    apply(p, ap);
    if (mean_zero) project_mean_zero(ap);
    const double pap = inner(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * ap[k];
    }
    if (mean_zero) {
      project_mean_zero(x);
      project_mean_zero(r);
    }
    res.iterations = it;
    res.residual_norm = std::sqrt(inner(r, r));
    if (res.residual_norm <= abs_tol) break;
    precondition(r, z);
    const double rz_next = inner(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = z[k] + beta * p[k];
    if (mean_zero) project_mean_zero(p);
  }
  // Report the true residual rather than the recursively updated one.
  apply(x, ax);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = b[k] - ax[k];
  if (mean_zero) project_mean_zero(r);
  res.residual_norm = std::sqrt(inner(r, r));
  res.converged = res.residual_norm <= abs_tol;
  return res;
}

// Thomas algorithm for a tridiagonal system with sub-diagonal `lower`,
// diagonal `diag` and super-diagonal `upper` (lower[0], upper[n-1] unused).
// Stable without pivoting for diagonally dominant matrices.
inline void solve_tridiagonal(const std::vector<double>& lower, const std::vector<double>& diag,
                              const std::vector<double>& upper, std::span<const double> rhs,
                              std::span<double> out) {
  const std::size_t n = diag.size();
  std::vector<double> c(n), d(n);
  double denom = diag[0];
  c[0] = n > 1 ? upper[0] / denom : 0.0;
  d[0] = rhs[0] / denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = diag[i] - lower[i] * c[i - 1];
    c[i] = i + 1 < n ? upper[i] / denom : 0.0;
    d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
  }
  out[n - 1] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) out[i] = d[i] - c[i] * out[i + 1];
}

}  // namespace kscons
