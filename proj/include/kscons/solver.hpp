#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "kscons/grid.hpp"
#include "kscons/linear.hpp"
#include "kscons/motility.hpp"

namespace kscons {

class CflViolationError : public Error {
 public:
  using Error::Error;
};

enum class LinearSolver {
  automatic,           // tridiagonal elimination in 1D, conjugate gradients in 2D
  direct,              // tridiagonal elimination (1D only)
  conjugate_gradient,  // CG warm-started from v
};

struct SchemeParams {
  double dt_max = kInfinity;
  double cfl_safety = 0.9;
  double t_end = 1.0;
  double v_l1_stop = 0.0;     // early stop once ||v||_1 <= v_l1_stop (disabled at 0)
  double linear_tol = 1e-13;  // relative residual of the implicit v solve
  LinearSolver linear_solver = LinearSolver::automatic;
};

// Full evolving state. A and uv_l1_cumulative are running sums kept with a
// compensation term so long runs do not accumulate round-off.
struct State {
  double t = 0.0;
  Field u;
  Field v;
  Field A;
  double uv_l1_cumulative = 0.0;
  long step_count = 0;

  double v_bound = 0.0;      // ||v^in||_inf, the comparison bound
  double gamma_bound = 0.0;  // sup of gamma over [0, v_bound]
  double last_dt = 0.0;
  double last_energy_residual = 0.0;

  Field A_carry;
  double uv_carry = 0.0;
};

inline State initial_state(const Field& u_in, const Field& v_in, const Motility& m) {
  if (!(u_in.grid() == v_in.grid())) throw Error("u^in and v^in live on different grids");
  if (!u_in.is_finite() || !v_in.is_finite()) throw Error("initial data must be finite");
  if (!u_in.is_nonnegative(0.0) || !v_in.is_nonnegative(0.0)) throw Error("initial data must be nonnegative");
  State s;
  s.u = u_in;
  s.v = v_in;
  s.A = Field(u_in.grid());
  s.A_carry = Field(u_in.grid());
  s.v_bound = lp_norm(v_in, kInfinity);
  s.gamma_bound = m.sup_gamma(s.v_bound);
  return s;
}

// Largest step allowed by the explicit u update: h^2 / (2 dim sup gamma).
inline double stable_dt(const Grid& g, double gamma_bound, double cfl_safety) {
  if (!(gamma_bound > 0.0)) return kInfinity;
  const double h = g.min_spacing();
  return cfl_safety * h * h / (2.0 * g.dim * gamma_bound);
}

// Backward Euler for dv/dt = Delta v - u v:
//   (I - dt Delta_h + dt diag(u)) v+ = v.
// The matrix is an M-matrix, so v+ >= 0 and max v+ <= max v.
inline Field step_v(const Field& u, const Field& v, double dt, double tol,
                    LinearSolver solver = LinearSolver::automatic) {
  if (!(dt > 0.0)) throw Error("step_v requires dt > 0");
  const Grid& g = v.grid();
  if (solver == LinearSolver::automatic)
    solver = g.dim == 1 ? LinearSolver::direct : LinearSolver::conjugate_gradient;
  Field out(g);
  if (solver == LinearSolver::direct) {
    if (g.dim != 1) throw Error("direct v solve is only available in 1D");
    const int n = g.cells[0];
    const double c = dt / (g.spacing[0] * g.spacing[0]);
    std::vector<double> lower(n, -c), diag(n), upper(n, -c);
    for (int i = 0; i < n; ++i) {
      const int neighbours = (i > 0) + (i + 1 < n);
      diag[i] = 1.0 + neighbours * c + dt * u[i];
    }
    solve_tridiagonal(lower, diag, upper, v.values(), out.values());
  } else {
    auto apply = [&](const Field& x, Field& y) {
      laplacian_neumann(x, y);
      for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[k] - dt * y[k] + dt * u[k] * x[k];
    };
    out = v;
    const double b_norm = std::sqrt(inner(v, v));
    CgResult cg;
    // Restarts recover from drift between the recursive and the true residual.
    for (int attempt = 0; attempt < 4; ++attempt) {
      cg = conjugate_gradient(apply, v, out, tol * b_norm, 50 * static_cast<int>(g.size()) + 100);
      if (cg.converged) break;
    }
    if (!cg.converged) throw NotConvergedError("implicit v solve did not converge", cg.residual_norm, cg.iterations);
  }
  return out;
}

// Explicit conservative update u+ = u + dt Delta_h w with w = u gamma(v).
inline Field step_u(const Field& u, const Field& w, double dt) {
  Field out = laplacian_neumann(w);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = u[k] + dt * out[k];
  const double lo = out.min();
  if (lo < -1e-14)
    throw CflViolationError("u became negative (" + std::to_string(lo) + "); time step violates the stability bound");
  return out;
}

// [||v+||^2 - ||v||^2]/dt + 2 ||grad v+||^2 + 2 ||v+ sqrt(u)||^2, with the
// difference of squares evaluated as <v+ - v, v+ + v>.
inline double energy_residual(const Field& u, const Field& v, const Field& v_next, double dt) {
  double diff = 0.0, absorb = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    diff += (v_next[k] - v[k]) * (v_next[k] + v[k]);
    absorb += u[k] * v_next[k] * v_next[k];
  }
  const double vol = v.grid().cell_volume();
  return diff * vol / dt + 2.0 * grad_sq_norm(v_next) + 2.0 * absorb * vol;
}

namespace detail {

// Neumaier-compensated a += x.
inline void compensated_add(double& sum, double& carry, double x) {
  const double t = sum + x;
  if (std::abs(sum) >= std::abs(x))
    carry += (sum - t) + x;
  else
    carry += (x - t) + sum;
  sum = t;
}

}  // namespace detail

// Chooses dt = min(dt_max, stability bound, t_end - t); a remainder shorter
// than two full steps is split evenly so no step is tiny.
inline double choose_dt(const State& s, const SchemeParams& p) {
  const double full = std::min(p.dt_max, stable_dt(s.u.grid(), s.gamma_bound, p.cfl_safety));
  const double remaining = p.t_end - s.t;
  if (remaining <= full) return remaining;
  if (remaining < 2.0 * full) return 0.5 * remaining;
  return full;
}

// One step: implicit v, then explicit u with the same w = u gamma(v+) that is
// added to A. This makes u - u^in - Delta_h A vanish up to round-off.
inline State step(const State& s, const Motility& m, const SchemeParams& p) {
  if (!(s.t < p.t_end)) throw Error("step called at or beyond t_end");
  const double dt = choose_dt(s, p);
  State next;
  next.v = step_v(s.u, s.v, dt, p.linear_tol, p.linear_solver);
  if (!next.v.is_nonnegative()) throw Error("implicit v step lost nonnegativity");
  if (next.v.max() > s.v.max() * (1.0 + 1e-12) + 1e-300)
    throw Error("implicit v step violated the maximum principle");

  const Grid& g = s.u.grid();
  Field w(g);
  const bool linear = m.is_linear();
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double vk = std::max(next.v[k], 0.0);
    w[k] = s.u[k] * (linear ? vk : m.gamma(vk));
  }
  next.u = step_u(s.u, w, dt);

  next.A = s.A;
  next.A_carry = s.A_carry;
  for (std::size_t k = 0; k < w.size(); ++k) detail::compensated_add(next.A[k], next.A_carry[k], dt * w[k]);

  next.uv_l1_cumulative = s.uv_l1_cumulative;
  next.uv_carry = s.uv_carry;
  detail::compensated_add(next.uv_l1_cumulative, next.uv_carry, dt * lp_norm(hadamard(s.u, next.v), 1.0));

  next.t = (dt == p.t_end - s.t) ? p.t_end : s.t + dt;
  next.step_count = s.step_count + 1;
  next.v_bound = s.v_bound;
  next.gamma_bound = s.gamma_bound;
  next.last_dt = dt;
  next.last_energy_residual = energy_residual(s.u, s.v, next.v, dt);
  return next;
}

// Compensated value of A (sum plus carry).
inline Field accumulated_A(const State& s) {
  Field a = s.A;
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += s.A_carry[k];
  return a;
}

// One record per sample time.
struct DiagnosticSample {
  double t = 0.0;
  double mass_u = 0.0;
  double v_l1 = 0.0;
  double v_l2 = 0.0;
  double v_linf = 0.0;
  double grad_v_l2 = 0.0;
  double uv_l1_cumulative = 0.0;
  double grad_A_sq = 0.0;
  double A_l1 = 0.0;
  double b9_residual = 0.0;
  double energy_residual = 0.0;
  double dt = 0.0;
  std::optional<Field> u, v, A;
};

// ||u - u^in - Delta_h A||_2.
inline double b9_residual(const State& s, const Field& u_in) {
  Field r = s.u - u_in;
  r -= laplacian_neumann(accumulated_A(s));
  return lp_norm(r, 2.0);
}

inline DiagnosticSample sample_state(const State& s, const Field& u_in, bool keep_fields) {
  DiagnosticSample d;
  d.t = s.t;
  d.mass_u = integrate(s.u);
  d.v_l1 = lp_norm(s.v, 1.0);
  d.v_l2 = lp_norm(s.v, 2.0);
  d.v_linf = lp_norm(s.v, kInfinity);
  d.grad_v_l2 = std::sqrt(grad_sq_norm(s.v));
  d.uv_l1_cumulative = s.uv_l1_cumulative + s.uv_carry;
  const Field a = accumulated_A(s);
  d.grad_A_sq = grad_sq_norm(a);
  d.A_l1 = lp_norm(a, 1.0);
  d.b9_residual = b9_residual(s, u_in);
  d.energy_residual = s.last_energy_residual;
  d.dt = s.last_dt;
  if (keep_fields) {
    d.u = s.u;
    d.v = s.v;
    d.A = a;
  }
  return d;
}

enum class StopReason { t_end, v_exhausted, failure };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::t_end: return "t_end";
    case StopReason::v_exhausted: return "v_exhausted";
    case StopReason::failure: return "failure";
  }
  return "?";
}

struct RunResult {
  State final_state;  // last good state on failure
  std::vector<DiagnosticSample> samples;
  double max_energy_residual = -kInfinity;
  double max_v_linf = 0.0;
  double max_ledger_defect = 0.0;  // max | ||v||_1 + uv_cumulative - ||v^in||_1 |
  StopReason stop_reason = StopReason::t_end;
  std::string error;
};

struct RunOptions {
  bool keep_fields = false;
};

// Trajectory driver. Records a sample at t = 0, at every sample time (the
// step is shortened to land on it exactly) and at the stopping time.
inline RunResult run(const Field& u_in, const Field& v_in, const Motility& m, const SchemeParams& p,
                     std::vector<double> sample_times, const RunOptions& opt = {}) {
  if (!(p.t_end > 0.0) || !std::isfinite(p.t_end)) throw Error("t_end must be positive and finite");
  if (!(p.cfl_safety > 0.0 && p.cfl_safety <= 1.0)) throw Error("cfl_safety must lie in (0, 1]");
  if (!(p.dt_max > 0.0)) throw Error("dt_max must be positive");
  std::sort(sample_times.begin(), sample_times.end());

  RunResult res;
  State s = initial_state(u_in, v_in, m);
  const double v_in_l1 = lp_norm(v_in, 1.0);
  res.max_v_linf = s.v_bound;
  res.samples.push_back(sample_state(s, u_in, opt.keep_fields));
  auto next_sample = sample_times.begin();
  auto exhausted = [&](const State& st) { return p.v_l1_stop > 0.0 && lp_norm(st.v, 1.0) <= p.v_l1_stop; };

  if (exhausted(s)) {
    res.stop_reason = StopReason::v_exhausted;
    res.final_state = std::move(s);
    return res;
  }
  while (s.t < p.t_end) {
    while (next_sample != sample_times.end() && *next_sample <= s.t) ++next_sample;
    SchemeParams leg = p;
    if (next_sample != sample_times.end()) leg.t_end = std::min(p.t_end, *next_sample);
    try {
      State n = step(s, m, leg);
      s = std::move(n);
    } catch (const Error& e) {
      res.stop_reason = StopReason::failure;
      res.error = e.what();
      break;
    }
    res.max_energy_residual = std::max(res.max_energy_residual, s.last_energy_residual);
    res.max_v_linf = std::max(res.max_v_linf, lp_norm(s.v, kInfinity));
    res.max_ledger_defect = std::max(
        res.max_ledger_defect, std::abs(lp_norm(s.v, 1.0) + (s.uv_l1_cumulative + s.uv_carry) - v_in_l1));
    const bool on_sample = next_sample != sample_times.end() && s.t == *next_sample;
    const bool stop = exhausted(s);
    if (on_sample || stop || s.t >= p.t_end) res.samples.push_back(sample_state(s, u_in, opt.keep_fields));
    if (stop) {
      res.stop_reason = StopReason::v_exhausted;
      break;
    }
  }
  if (res.max_energy_residual == -kInfinity) res.max_energy_residual = 0.0;
  res.final_state = std::move(s);
  return res;
}

// Sample times t_end * k / count, k = 1..count.
inline std::vector<double> uniform_samples(double t_end, int count) {
  std::vector<double> t;
  for (int k = 1; k <= count; ++k) t.push_back(t_end * k / count);
  return t;
}

}  // namespace kscons
