#pragma once

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <vector>

#include "kscons/grid.hpp"
#include "kscons/linear.hpp"

namespace kscons {

inline constexpr double kDefaultPoissonTol = 1e-10;

enum class PoissonMethod {
  conjugate_gradient,  // iterative, mean-zero projected every iteration
  cosine_transform,    // diagonalization by the DCT-II on uniform grids
};

// Zero-mean solution w of -laplacian_neumann(w) = z - mean(z).
struct PoissonSolution {
  Field potential;
  double residual_norm = 0.0;
  int iterations = 0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline PoissonSolution solve_k_transform(const Field& rhs) {
  const Grid& g = rhs.grid();
  const int nx = g.cells[0];
  const int ny = g.cells[1];
  std::vector<double> buf(rhs.begin(), rhs.end());
  std::vector<double> coef(buf.size());
  // Planning and execution are serialized; FFTW's planner is not reentrant.
  std::lock_guard lock(fftw_planner_mutex());
  fftw_plan fwd, bwd;
  if (g.dim == 1) {
    fwd = fftw_plan_r2r_1d(nx, buf.data(), coef.data(), FFTW_REDFT10, FFTW_ESTIMATE);
    bwd = fftw_plan_r2r_1d(nx, coef.data(), buf.data(), FFTW_REDFT01, FFTW_ESTIMATE);
  } else {
    fwd = fftw_plan_r2r_2d(ny, nx, buf.data(), coef.data(), FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
    bwd = fftw_plan_r2r_2d(ny, nx, coef.data(), buf.data(), FFTW_REDFT01, FFTW_REDFT01, FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  auto eig = [](int k, int n, double h) {
    const double s = std::sin(std::numbers::pi * k / (2.0 * n));
    return 4.0 / (h * h) * s * s;
  };
  double norm = 2.0 * nx;
  if (g.dim == 2) norm *= 2.0 * ny;
  for (int l = 0; l < ny; ++l) {
    const double ey = g.dim == 2 ? eig(l, ny, g.spacing[1]) : 0.0;
    for (int k = 0; k < nx; ++k) {
      const double e = eig(k, nx, g.spacing[0]) + ey;
      const std::size_t idx = g.index(k, l);
      coef[idx] = (k == 0 && l == 0) ? 0.0 : coef[idx] / (e * norm);
    }
  }
  fftw_execute(bwd);
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);
  PoissonSolution sol{Field(g, std::move(buf)), 0.0, 0};
  project_mean_zero(sol.potential);
  return sol;
}

}  // namespace detail

// The operator K: solves -Delta w = z - <z> with homogeneous Neumann data and
// <w> = 0. `max_iterations <= 0` selects 10 * (number of cells).
inline PoissonSolution solve_k(const Field& z, double tol = kDefaultPoissonTol,
                               PoissonMethod method = PoissonMethod::conjugate_gradient, int max_iterations = 0) {
  if (!(tol > 0.0)) throw Error("Poisson tolerance must be positive");
  const Grid& g = z.grid();
  Field rhs = z;
  project_mean_zero(rhs);

  auto neg_laplacian = [](const Field& x, Field& out) {
    laplacian_neumann(x, out);
    for (double& v : out) v = -v;
  };

  PoissonSolution sol;
  if (method == PoissonMethod::cosine_transform) {
    sol = detail::solve_k_transform(rhs);
  } else {
    if (max_iterations <= 0) max_iterations = 10 * static_cast<int>(g.size());
    sol.potential = Field(g);
    const CgResult cg = conjugate_gradient(neg_laplacian, rhs, sol.potential, tol, max_iterations, nullptr, true);
    sol.iterations = cg.iterations;
    if (!cg.converged) throw NotConvergedError("Neumann Poisson solve did not converge", cg.residual_norm, cg.iterations);
  }
  Field res(g);
  neg_laplacian(sol.potential, res);
  res -= rhs;
  sol.residual_norm = std::sqrt(inner(res, res));
  return sol;
}

// ||z||_{(H^1)'} := ||grad K[z - <z>]||_2 + |<z>|.
inline double h1_dual_norm(const Field& z, double tol = kDefaultPoissonTol,
                           PoissonMethod method = PoissonMethod::conjugate_gradient) {
  const double m = mean(z);
  const PoissonSolution sol = solve_k(z, tol, method);
  return std::sqrt(grad_sq_norm(sol.potential)) + std::abs(m);
}

}  // namespace kscons
