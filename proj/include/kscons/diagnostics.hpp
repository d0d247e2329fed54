#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "kscons/elliptic.hpp"
#include "kscons/grid.hpp"
#include "kscons/motility.hpp"
#include "kscons/solver.hpp"

namespace kscons {

inline constexpr double kDefaultDiscretizationTol = 0.05;

// lhs <= rhs, with slack = (rhs - lhs) / max(|rhs|, 1e-30). A check passes
// when slack >= -tolerance. Informative checks record a condition and never
// fail a run.
struct BoundCheck {
  std::string name;
  std::string paper_eq;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double tolerance = 0.0;
  bool informative = false;
  double t = 0.0;  // sample time of the worst case
  std::string note;

  bool pass() const { return slack >= -tolerance; }
};

inline BoundCheck make_check(std::string name, std::string eq, double lhs, double rhs, double tolerance = 0.0,
                             double t = 0.0) {
  BoundCheck c;
  c.name = std::move(name);
  c.paper_eq = std::move(eq);
  c.lhs = lhs;
  c.rhs = rhs;
  c.slack = (rhs - lhs) / (rhs != 0.0 ? std::abs(rhs) : 1.0);
  c.tolerance = tolerance;
  c.t = t;
  return c;
}

// Of several evaluations of the same check, keeps the one with least slack.
inline BoundCheck worst_of(const std::vector<BoundCheck>& cs) {
  if (cs.empty()) throw Error("worst_of: no checks");
  return *std::min_element(cs.begin(), cs.end(),
                           [](const BoundCheck& a, const BoundCheck& b) { return a.slack < b.slack; });
}

// ||u^in||_inf ||v^in||_1 sup_{[0,V]} |gamma'|.
inline double product_bound(const Field& u_in, const Field& v_in, const Motility& m) {
  return lp_norm(u_in, kInfinity) * lp_norm(v_in, 1.0) * m.sup_gamma_prime(lp_norm(v_in, kInfinity));
}

// Mass equality, maximum principle for v, cumulative absorption bound.
inline std::vector<BoundCheck> check_conservation(const DiagnosticSample& s, const Field& u_in, const Field& v_in) {
  const double m_in = integrate(u_in);
  const double v_max = lp_norm(v_in, kInfinity);
  return {
      make_check("mass_conservation", "b1", std::abs(s.mass_u - m_in), 1e-12 * std::abs(m_in), 0.0, s.t),
      make_check("v_max_principle", "b1", s.v_linf, v_max + 1e-14, 0.0, s.t),
      make_check("uv_cumulative", "b2", s.uv_l1_cumulative, lp_norm(v_in, 1.0), 1e-8, s.t),
  };
}

inline std::vector<BoundCheck> check_conservation(const State& s, const Field& u_in, const Field& v_in) {
  return check_conservation(sample_state(s, u_in, false), u_in, v_in);
}

// ||v(t)||_1 + int_0^t ||uv||_1 = ||v^in||_1.
inline BoundCheck check_absorption_ledger(const DiagnosticSample& s, const Field& v_in, double tol = 1e-8) {
  return make_check("absorption_ledger", "b3", std::abs(s.v_l1 + s.uv_l1_cumulative - lp_norm(v_in, 1.0)), tol, 0.0,
                    s.t);
}

inline std::vector<BoundCheck> check_A_bounds(const DiagnosticSample& s, const Field& u_in, const Field& v_in,
                                              const Motility& m, double tol = kDefaultDiscretizationTol) {
  const double gp = m.sup_gamma_prime(lp_norm(v_in, kInfinity));
  const double v1 = lp_norm(v_in, 1.0);
  return {
      make_check("A_l1_bound", "b4", s.A_l1, v1 * gp, tol, s.t),
      make_check("grad_A_bound", "b5", s.grad_A_sq, lp_norm(u_in, kInfinity) * v1 * gp, tol, s.t),
  };
}

inline std::vector<BoundCheck> check_A_bounds(const State& s, const Field& u_in, const Field& v_in,
                                              const Motility& m, double tol = kDefaultDiscretizationTol) {
  return check_A_bounds(sample_state(s, u_in, false), u_in, v_in, m, tol);
}

inline BoundCheck check_b9(const DiagnosticSample& s, const Field& u_in) {
  return make_check("auxiliary_identity", "b9", s.b9_residual, 1e-10 * (1.0 + lp_norm(u_in, 2.0)), 0.0, s.t);
}

inline BoundCheck check_b9(const State& s, const Field& u_in) {
  return make_check("auxiliary_identity", "b9", b9_residual(s, u_in), 1e-10 * (1.0 + lp_norm(u_in, 2.0)), 0.0,
                    s.t);
}

// Discrete L^2 dissipation identity for v; next must be one step from prev.
inline double energy_residual(const State& prev, const State& next) {
  return energy_residual(prev.u, prev.v, next.v, next.t - prev.t);
}

struct DecayRow {
  double t = 0.0;
  double v_l1 = 0.0;
  double envelope_rhs = 0.0;
  double integral = 0.0;  // int_0^t e^{M(s-t)} ||grad v(s)||_2 ds
  bool pass = true;
};

struct DecayDiagnostic {
  bool skipped = false;  // M = 0
  std::string note;
  double c1 = 0.0;
  double M = 0.0;
  double tolerance = kDefaultDiscretizationTol;
  std::vector<DecayRow> rows;

  bool pass() const {
    return skipped || std::all_of(rows.begin(), rows.end(), [](const DecayRow& r) { return r.pass; });
  }
};

// Envelope ||v^in||_1 e^{-Mt} + c1 int_0^t e^{M(s-t)} ||grad v(s)||_2 ds,
// with c1 = ||u^in||_2 + sqrt(||u^in||_inf ||v^in||_1 sup|gamma'|) and the
// integral accumulated by the trapezoid rule over the sample times.
inline DecayDiagnostic decay_envelope(const std::vector<DiagnosticSample>& samples, const Field& u_in,
                                      const Field& v_in, const Motility& m,
                                      double tol = kDefaultDiscretizationTol) {
  DecayDiagnostic d;
  d.tolerance = tol;
  d.M = mean(u_in);
  if (!(d.M > 0.0)) {
    d.skipped = true;
    d.note = "M = mean(u^in) = 0: decay envelope requires M > 0";
    return d;
  }
  d.c1 = lp_norm(u_in, 2.0) + std::sqrt(product_bound(u_in, v_in, m));
  const double v1 = lp_norm(v_in, 1.0);
  // I(t) = int_0^t e^{M(s-t)} g(s) ds satisfies I(t2) = e^{-M dt} I(t1) + trapezoid on the step.
  double integral = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (k > 0) {
      const auto& p = samples[k - 1];
      const double h = s.t - p.t;
      const double decay = std::exp(-d.M * h);
      integral = decay * integral + 0.5 * h * (decay * p.grad_v_l2 + s.grad_v_l2);
    }
    DecayRow r;
    r.t = s.t;
    r.v_l1 = s.v_l1;
    r.integral = integral;
    r.envelope_rhs = v1 * std::exp(-d.M * s.t) + d.c1 * integral;
    r.pass = r.v_l1 <= r.envelope_rhs * (1.0 + tol);
    d.rows.push_back(r);
  }
  return d;
}

// Worst envelope row as a BoundCheck.
inline BoundCheck envelope_check(const DecayDiagnostic& d) {
  if (d.skipped || d.rows.empty()) {
    BoundCheck c = make_check("v_l1_envelope", "b11", 0.0, 0.0, d.tolerance);
    c.note = d.skipped ? d.note : "no samples";
    return c;
  }
  std::vector<BoundCheck> cs;
  for (const auto& r : d.rows) cs.push_back(make_check("v_l1_envelope", "b11", r.v_l1, r.envelope_rhs, d.tolerance, r.t));
  return worst_of(cs);
}

// The envelope integral term tends to zero: it must be non-increasing over the
// second half of the samples and end below 1% of its maximum.
inline BoundCheck envelope_tail_check(const DecayDiagnostic& d) {
  if (d.skipped || d.rows.size() < 2) {
    BoundCheck c = make_check("envelope_tail", "b12", 0.0, 0.0);
    c.note = d.skipped ? d.note : "too few samples";
    return c;
  }
  double peak = 0.0;
  for (const auto& r : d.rows) peak = std::max(peak, r.integral);
  double increase = 0.0;
  for (std::size_t k = d.rows.size() / 2 + 1; k < d.rows.size(); ++k)
    increase += std::max(0.0, d.rows[k].integral - d.rows[k - 1].integral);
  BoundCheck c = make_check("envelope_tail", "b12", d.rows.back().integral + increase, 0.01 * peak, 0.0, d.rows.back().t);
  c.note = "limit reading: the integral term decays to zero as t grows";
  return c;
}

class LimitNotReachedError : public Error {
 public:
  using Error::Error;
};

struct LimitRecord {
  Field A_inf;
  Field u_inf;
  double dist_dual = 0.0;      // ||u_inf - u^in||_(H^1)'
  double nonconst_dual = 0.0;  // ||u_inf - <u_inf>||_(H^1)'
  bool certified_nonconstant = false;
  double mean_defect = 0.0;    // |<u_inf> - <u^in>|
  double min_u_inf = 0.0;
};

// A_inf = A(t_final), u_inf = u^in + Delta_h A_inf. Requires the run to have
// exhausted v (||v||_1 <= v_l1_stop).
inline LimitRecord extract_limit(const State& s_final, const Field& u_in, double tol, double v_l1_stop,
                                 PoissonMethod method = PoissonMethod::conjugate_gradient) {
  const double v1 = lp_norm(s_final.v, 1.0);
  if (v1 > v_l1_stop)
    throw LimitNotReachedError("run has not exhausted v (||v||_1 = " + std::to_string(v1) + " > " +
                               std::to_string(v_l1_stop) + "); increase t_end");
  LimitRecord lr;
  lr.A_inf = accumulated_A(s_final);
  lr.u_inf = u_in + laplacian_neumann(lr.A_inf);
  lr.dist_dual = h1_dual_norm(lr.u_inf - u_in, tol, method);
  const double m_inf = mean(lr.u_inf);
  lr.nonconst_dual = h1_dual_norm(lr.u_inf - m_inf, tol, method);
  lr.mean_defect = std::abs(m_inf - mean(u_in));
  lr.min_u_inf = lr.u_inf.min();
  return lr;
}

// u_inf keeps the mean of u^in and is nonnegative.
inline std::vector<BoundCheck> check_limit_properties(const LimitRecord& lr, const Field& u_in) {
  return {
      make_check("limit_mean", "thm1", lr.mean_defect, 1e-10 * std::abs(mean(u_in))),
      make_check("limit_nonnegative", "thm1", std::max(0.0, -lr.min_u_inf), 1e-10),
  };
}

inline BoundCheck check_b13(const LimitRecord& lr, const Field& u_in, const Field& v_in, const Motility& m,
                            double tol = kDefaultDiscretizationTol) {
  return make_check("grad_A_inf_bound", "b13", grad_sq_norm(lr.A_inf), product_bound(u_in, v_in, m), tol);
}

struct Prop2Result {
  BoundCheck dist;       // dist_dual^2 <= product bound
  BoundCheck smalldist;  // product bound < ||u^in - <u^in>||^2 (a condition)
  bool smalldist_holds = false;
  double lower_bound = 0.0;  // ||u^in - <u^in>|| - dist_dual
};

// Distance estimate and, when the smallness condition holds, the
// non-constancy certificate through the triangle inequality
//   ||u_inf - <u^in>|| >= ||u^in - <u^in>|| - ||u_inf - u^in|| > 0.
// Sets lr.certified_nonconstant.
inline Prop2Result check_prop2(LimitRecord& lr, const Field& u_in, const Field& v_in, const Motility& m,
                               double poisson_tol = kDefaultPoissonTol, double tol = kDefaultDiscretizationTol,
                               PoissonMethod method = PoissonMethod::conjugate_gradient) {
  Prop2Result r;
  const double bound = product_bound(u_in, v_in, m);
  r.dist = make_check("limit_distance", "dist", lr.dist_dual * lr.dist_dual, bound, tol);
  const double spread = h1_dual_norm(u_in - mean(u_in), poisson_tol, method);
  r.smalldist = make_check("smalldist_condition", "smalldist", bound, spread * spread);
  r.smalldist.informative = true;
  r.smalldist_holds = bound < spread * spread;
  r.lower_bound = spread - lr.dist_dual;
  lr.certified_nonconstant =
      r.smalldist_holds && r.lower_bound > 0.0 && lr.nonconst_dual >= r.lower_bound - 1e3 * poisson_tol;
  return r;
}

enum class TimeQuadrature {
  trapezoid_samples,  // trapezoid rule over the sample times
  scheme_rectangle,   // the scheme's own rectangle rule, i.e. the accumulated A
};

// Neumann eigenmode cos(pi m x / Lx) (times cos(pi m y / Ly) in 2D).
inline Field cosine_mode(const Grid& g, int mode) {
  if (g.dim == 1)
    return Field::from_function(g, [&](double x) { return std::cos(std::numbers::pi * mode * x / g.extent[0]); });
  return Field::from_function(g, [&](double x, double y) {
    return std::cos(std::numbers::pi * mode * x / g.extent[0]) * std::cos(std::numbers::pi * mode * y / g.extent[1]);
  });
}

// |<u(t) - u^in, theta> - int_0^t <u gamma(v), Delta_h theta> ds| at the last
// sample, for a time-independent test function theta = cosine_mode(test_mode).
// Samples must carry fields.
inline double weak_form_residual(const std::vector<DiagnosticSample>& samples, const Field& u_in, const Motility& m,
                                 int test_mode, TimeQuadrature q = TimeQuadrature::trapezoid_samples) {
  if (samples.empty()) throw Error("weak_form_residual: no samples");
  for (const auto& s : samples)
    if (!s.u || !s.v || !s.A) throw Error("weak_form_residual: samples must carry fields");
  const Field theta = cosine_mode(u_in.grid(), test_mode);
  const Field lap_theta = laplacian_neumann(theta);
  const auto& last = samples.back();
  const double lhs = inner(*last.u - u_in, theta);
  double flux = 0.0;
  if (q == TimeQuadrature::scheme_rectangle) {
    flux = inner(*last.A, lap_theta);
  } else {
    auto integrand = [&](const DiagnosticSample& s) {
      Field w(u_in.grid());
      for (std::size_t k = 0; k < w.size(); ++k) w[k] = (*s.u)[k] * m.gamma(std::max((*s.v)[k], 0.0));
      return inner(w, lap_theta);
    };
    double prev = integrand(samples.front());
    for (std::size_t k = 1; k < samples.size(); ++k) {
      const double cur = integrand(samples[k]);
      flux += 0.5 * (samples[k].t - samples[k - 1].t) * (prev + cur);
      prev = cur;
    }
  }
  return std::abs(lhs - flux);
}

// Final ||v||_p below the threshold implied by the stopping rule (Hoelder:
// ||v||_p <= V^{1-1/p} ||v||_1^{1/p}), and ||v||_1 non-increasing in time.
inline std::vector<BoundCheck> check_v_decay(const std::vector<DiagnosticSample>& samples, double v_bound,
                                             double v_l1_stop, const std::vector<double>& p_values = {1.0, 2.0}) {
  if (samples.empty()) throw Error("check_v_decay: no samples");
  std::vector<BoundCheck> out;
  const auto& last = samples.back();
  for (double p : p_values) {
    const double actual = p == 1.0 ? last.v_l1 : (p == 2.0 ? last.v_l2 : kInfinity);
    if (!std::isfinite(actual)) throw Error("check_v_decay supports p in {1, 2}");
    const double threshold = std::pow(v_bound, 1.0 - 1.0 / p) * std::pow(v_l1_stop, 1.0 / p);
    out.push_back(make_check(p == 1.0 ? "v_decay_l1" : "v_decay_l2", "cvv", actual, threshold, 0.0, last.t));
  }
  double increase = 0.0;
  for (std::size_t k = 1; k < samples.size(); ++k)
    increase = std::max(increase, samples[k].v_l1 - samples[k - 1].v_l1 * (1.0 + 1e-14));
  out.push_back(make_check("v_l1_monotone", "b3", increase, 0.0));
  return out;
}

// ||A(t_k) - A(t_final)||_2 must decrease along the samples and the last
// increment must be below rel_tol * ||A(t_final)||_2.
inline BoundCheck check_A_convergence(const std::vector<DiagnosticSample>& samples, double rel_tol = 1e-6) {
  std::vector<const Field*> snaps;
  for (const auto& s : samples)
    if (s.A) snaps.push_back(&*s.A);
  if (snaps.size() < 3) throw Error("check_A_convergence needs at least 3 snapshots of A");
  const Field& fin = *snaps.back();
  std::vector<double> dist;
  for (const Field* a : snaps) dist.push_back(lp_norm(*a - fin, 2.0));
  double violation = 0.0;
  for (std::size_t k = 1; k < dist.size(); ++k) violation += std::max(0.0, dist[k] - dist[k - 1]);
  const double last_increment = dist[dist.size() - 2];
  BoundCheck c = make_check("A_convergence", "b7", last_increment + violation, rel_tol * lp_norm(fin, 2.0), 0.0,
                            samples.back().t);
  return c;
}

}  // namespace kscons
