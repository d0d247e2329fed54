#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "kscons/config.hpp"
#include "kscons/diagnostics.hpp"

namespace kscons {

using json = nlohmann::json;

struct Scenario {
  ScenarioConfig cfg;
  Grid grid;
  Field u_in;
  Field v_in;
  Motility gamma;
  SchemeParams params;
  std::vector<double> sample_times;

  static Scenario from(const ScenarioConfig& c) {
    const Grid g = c.grid();
    Field u = make_initial(c.u_in, g, "initial.u");
    Field v = make_initial(c.v_in, g, "initial.v");
    Motility m = make_motility(c.gamma, lp_norm(v, kInfinity));
    SchemeParams p = c.scheme;
    p.v_l1_stop = c.v_l1_stop.value_or(1e-8 * lp_norm(v, 1.0));
    std::vector<double> times = c.sample_times;
    if (times.empty()) times = uniform_samples(p.t_end, c.sample_count);
    times.erase(std::remove_if(times.begin(), times.end(), [&](double t) { return t > p.t_end; }), times.end());
    return Scenario{c, g, std::move(u), std::move(v), std::move(m), p, std::move(times)};
  }
};

struct Evaluation {
  RunResult run;
  std::vector<BoundCheck> checks;
  std::optional<LimitRecord> limit;
  std::optional<Prop2Result> prop2;
  DecayDiagnostic decay;
  double product_bound = 0.0;
  double spread_sq = 0.0;  // ||u^in - <u^in>||^2 in (H^1)'
  double weak_residual = 0.0;
  double runtime_s = 0.0;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.informative || c.pass(); });
  }
  const BoundCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

// Worst check per name, over all samples, in first-seen order.
inline void append_worst(std::vector<BoundCheck>& out, const std::vector<std::vector<BoundCheck>>& per_sample) {
  std::vector<std::string> order;
  std::vector<std::vector<BoundCheck>> groups;
  for (const auto& cs : per_sample) {
    for (const auto& c : cs) {
      auto it = std::find(order.begin(), order.end(), c.name);
      if (it == order.end()) {
        order.push_back(c.name);
        groups.push_back({c});
      } else {
        groups[it - order.begin()].push_back(c);
      }
    }
  }
  for (const auto& g : groups) out.push_back(worst_of(g));
}

inline BoundCheck failed(std::string name, std::string eq, double lhs, double rhs, std::string note) {
  BoundCheck c = make_check(std::move(name), std::move(eq), lhs, rhs);
  if (c.pass()) c.slack = -1.0;
  c.note = std::move(note);
  return c;
}

}  // namespace detail

inline Evaluation evaluate(const Scenario& sc) {
  const auto& cfg = sc.cfg;
  const auto& ch = cfg.checks;
  const double tol = cfg.tol_discretization;
  Evaluation ev;
  const auto t0 = std::chrono::steady_clock::now();
  const bool keep = ch.a_convergence || ch.weak_form;
  ev.run = run(sc.u_in, sc.v_in, sc.gamma, sc.params, sc.sample_times, RunOptions{keep});
  ev.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& r = ev.run;
  const auto& samples = r.samples;
  ev.product_bound = product_bound(sc.u_in, sc.v_in, sc.gamma);
  const double spread = h1_dual_norm(sc.u_in - mean(sc.u_in), cfg.poisson_tol, cfg.poisson_method);
  ev.spread_sq = spread * spread;

  if (r.stop_reason == StopReason::failure)
    ev.checks.push_back(detail::failed("run_completed", "scheme", 1.0, 0.0, r.error));

  std::vector<std::vector<BoundCheck>> per_sample;
  for (const auto& s : samples) {
    std::vector<BoundCheck> cs;
    if (ch.conservation) {
      auto c = check_conservation(s, sc.u_in, sc.v_in);
      cs.insert(cs.end(), c.begin(), c.end());
    }
    if (ch.a_bounds) {
      auto c = check_A_bounds(s, sc.u_in, sc.v_in, sc.gamma, tol);
      cs.insert(cs.end(), c.begin(), c.end());
    }
    if (ch.identity) cs.push_back(check_b9(s, sc.u_in));
    per_sample.push_back(std::move(cs));
  }
  detail::append_worst(ev.checks, per_sample);

  if (ch.ledger) {
    BoundCheck c = make_check("absorption_ledger", "b3", r.max_ledger_defect, 1e-8);
    c.note = "max over steps of | ||v||_1 + int ||uv||_1 - ||v^in||_1 |";
    ev.checks.push_back(c);
  }
  if (ch.dissipation) {
    BoundCheck c = make_check("l2_dissipation", "lemma_b3", r.max_energy_residual, 0.0);
    c.note = "max over steps of the discrete L2 energy residual";
    ev.checks.push_back(c);
  }
  if (ch.envelope) {
    ev.decay = decay_envelope(samples, sc.u_in, sc.v_in, sc.gamma, tol);
    if (ev.decay.skipped) {
      BoundCheck c = make_check("v_l1_envelope", "b11", 0.0, 0.0);
      c.informative = true;
      c.note = ev.decay.note;
      ev.checks.push_back(c);
    } else {
      ev.checks.push_back(envelope_check(ev.decay));
      ev.checks.push_back(envelope_tail_check(ev.decay));
    }
  }
  if (ch.limit) {
    if (r.stop_reason != StopReason::failure && lp_norm(r.final_state.v, 1.0) <= sc.params.v_l1_stop) {
      LimitRecord lr = extract_limit(r.final_state, sc.u_in, cfg.poisson_tol, sc.params.v_l1_stop, cfg.poisson_method);
      auto lp = check_limit_properties(lr, sc.u_in);
      ev.checks.insert(ev.checks.end(), lp.begin(), lp.end());
      ev.checks.push_back(make_check("limit_consistency", "b9", lp_norm(lr.u_inf - r.final_state.u, 2.0), 1e-10));
      ev.checks.push_back(check_b13(lr, sc.u_in, sc.v_in, sc.gamma, tol));
      Prop2Result p2 = check_prop2(lr, sc.u_in, sc.v_in, sc.gamma, cfg.poisson_tol, tol, cfg.poisson_method);
      ev.checks.push_back(p2.dist);
      ev.checks.push_back(p2.smalldist);
      BoundCheck cert = make_check("nonconstant_certificate", "smalldist", p2.lower_bound, lr.nonconst_dual);
      cert.informative = !p2.smalldist_holds;
      if (p2.smalldist_holds && !lr.certified_nonconstant) {
        cert.slack = std::min(cert.slack, -1.0);
        cert.note = "smallness holds but the triangle-inequality lower bound is not positive";
      } else if (!p2.smalldist_holds) {
        cert.note = "smallness condition not met; no certificate claimed";
      }
      ev.checks.push_back(cert);
      ev.prop2 = p2;
      ev.limit = std::move(lr);
    } else {
      ev.checks.push_back(detail::failed("limit_reached", "thm1", lp_norm(r.final_state.v, 1.0), sc.params.v_l1_stop,
                                         "v not exhausted by t_end; increase t_end"));
    }
  }
  if (ch.v_decay) {
    auto c = check_v_decay(samples, lp_norm(sc.v_in, kInfinity), sc.params.v_l1_stop);
    ev.checks.insert(ev.checks.end(), c.begin(), c.end());
  }
  if (ch.a_convergence) {
    if (samples.size() >= 3) {
      ev.checks.push_back(check_A_convergence(samples));
    } else {
      BoundCheck c = make_check("A_convergence", "b7", 0.0, 0.0);
      c.informative = true;
      c.note = "fewer than 3 samples";
      ev.checks.push_back(c);
    }
  }
  if (ch.weak_form) {
    const double scale = 1e-10 * (1.0 + lp_norm(sc.u_in, 2.0));
    ev.checks.push_back(make_check("weak_form_identity", "ws",
                                   weak_form_residual(samples, sc.u_in, sc.gamma, 1, TimeQuadrature::scheme_rectangle),
                                   scale, 0.0, samples.back().t));
    ev.weak_residual = weak_form_residual(samples, sc.u_in, sc.gamma, 1);
    BoundCheck c = make_check("weak_form_residual", "ws", ev.weak_residual, 0.0, 0.0, samples.back().t);
    c.informative = true;
    c.note = "trapezoid over sample times, mode 1; O(h^2 + dt + sample spacing)";
    ev.checks.push_back(c);
  }
  return ev;
}

// ---------------------------------------------------------------- artifacts

inline const char* to_string(PoissonMethod m) {
  return m == PoissonMethod::cosine_transform ? "cosine_transform" : "conjugate_gradient";
}

inline const char* to_string(LinearSolver s) {
  switch (s) {
    case LinearSolver::automatic: return "automatic";
    case LinearSolver::direct: return "direct";
    case LinearSolver::conjugate_gradient: return "conjugate_gradient";
  }
  return "?";
}

inline json to_json(const InitialSpec& s) {
  switch (s.kind) {
    case InitialSpec::Kind::constant: return {{"kind", "constant"}, {"value", s.value}};
    case InitialSpec::Kind::cosine:
      return {{"kind", "cosine"}, {"mean", s.mean}, {"amplitude", s.amplitude}, {"mode", {s.mode[0], s.mode[1]}}};
    case InitialSpec::Kind::snapshot: return {{"kind", "snapshot"}, {"file", s.file}};
  }
  return {};
}

inline json to_json(const BoundCheck& c) {
  return {{"name", c.name},   {"paper_eq", c.paper_eq},   {"lhs", c.lhs},
          {"rhs", c.rhs},     {"slack", c.slack},         {"tolerance", c.tolerance},
          {"pass", c.pass()}, {"informative", c.informative}, {"t", c.t},
          {"note", c.note}};
}

inline json config_json(const Scenario& sc) {
  const auto& c = sc.cfg;
  const auto& p = sc.params;
  json checks = {{"conservation", c.checks.conservation}, {"ledger", c.checks.ledger},
                 {"A_bounds", c.checks.a_bounds},         {"identity", c.checks.identity},
                 {"dissipation", c.checks.dissipation},   {"envelope", c.checks.envelope},
                 {"limit", c.checks.limit},               {"v_decay", c.checks.v_decay},
                 {"A_convergence", c.checks.a_convergence}, {"weak_form", c.checks.weak_form}};
  return {
      {"schema_version", c.schema_version},
      {"name", c.name},
      {"grid", {{"dim", c.dim}, {"extent", {c.extent[0], c.extent[1]}}, {"cells", {c.cells[0], c.cells[1]}}}},
      {"initial", {{"u", to_json(c.u_in)}, {"v", to_json(c.v_in)}}},
      {"gamma", sc.gamma.describe()},
      {"scheme",
       {{"t_end", p.t_end},
        {"dt_max", std::isfinite(p.dt_max) ? json(p.dt_max) : json("inf")},
        {"cfl_safety", p.cfl_safety},
        {"v_l1_stop", p.v_l1_stop},
        {"linear_tol", p.linear_tol},
        {"linear_solver", to_string(p.linear_solver)}}},
      {"poisson", {{"tol", c.poisson_tol}, {"method", to_string(c.poisson_method)}}},
      {"samples", sc.sample_times.size()},
      {"tol_discretization", c.tol_discretization},
      {"verify", {{"t_compare", c.t_compare}, {"min_cells", c.min_cells}}},
      {"checks", checks},
  };
}

inline json report_json(const Scenario& sc, const Evaluation& ev) {
  const auto& r = ev.run;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = config_json(sc);
  j["run"] = {{"stop_reason", to_string(r.stop_reason)},
              {"t_final", r.final_state.t},
              {"steps", r.final_state.step_count},
              {"runtime_s", ev.runtime_s},
              {"error", r.error},
              {"max_energy_residual", r.max_energy_residual},
              {"max_v_linf", r.max_v_linf},
              {"max_ledger_defect", r.max_ledger_defect}};
  j["checks"] = json::array();
  for (const auto& c : ev.checks) j["checks"].push_back(to_json(c));
  j["bounds"] = {{"product_bound", ev.product_bound},
                 {"u_in_sup", lp_norm(sc.u_in, kInfinity)},
                 {"v_in_l1", lp_norm(sc.v_in, 1.0)},
                 {"sup_gamma_prime", sc.gamma.sup_gamma_prime(lp_norm(sc.v_in, kInfinity))},
                 {"spread_sq", ev.spread_sq}};
  if (ev.limit) {
    const auto& lr = *ev.limit;
    j["limit"] = {{"dist_dual", lr.dist_dual},
                  {"dist_dual_sq", lr.dist_dual * lr.dist_dual},
                  {"nonconst_dual", lr.nonconst_dual},
                  {"certified_nonconstant", lr.certified_nonconstant},
                  {"smalldist_holds", ev.prop2 && ev.prop2->smalldist_holds},
                  {"lower_bound", ev.prop2 ? ev.prop2->lower_bound : 0.0},
                  {"mean_defect", lr.mean_defect},
                  {"min_u_inf", lr.min_u_inf},
                  {"grad_A_inf_sq", grad_sq_norm(lr.A_inf)}};
  } else {
    j["limit"] = nullptr;
  }
  j["envelope"] = json::array();
  for (const auto& row : ev.decay.rows)
    j["envelope"].push_back({{"t", row.t}, {"v_l1", row.v_l1}, {"envelope", row.envelope_rhs},
                             {"integral", row.integral}, {"pass", row.pass}});
  j["pass"] = ev.pass();
  return j;
}

inline void write_timeseries(std::ostream& os, const std::vector<DiagnosticSample>& samples) {
  os << "t,mass_u,v_l1,v_l2,v_linf,uv_l1_cumulative,grad_A_sq,A_l1,b9_residual,energy_residual,dt\n";
  for (const auto& s : samples) {
    const double row[] = {s.t,         s.mass_u,    s.v_l1, s.v_l2,          s.v_linf,         s.uv_l1_cumulative,
                          s.grad_A_sq, s.A_l1,      s.b9_residual, s.energy_residual, s.dt};
    for (std::size_t k = 0; k < std::size(row); ++k) os << (k ? "," : "") << format_double(row[k]);
    os << '\n';
  }
}

// Output directory: explicit override, else the config's output_dir, else
// runs/<name>. Relative paths are placed under $KSCONS_OUTPUT_ROOT if set.
inline std::filesystem::path resolve_output_dir(const ScenarioConfig& c, const std::string& override_dir = {}) {
  std::filesystem::path p = std::filesystem::path("runs") / (c.name.empty() ? "scenario" : c.name);
  if (!override_dir.empty()) p = override_dir;
  else if (!c.output_dir.empty()) p = c.output_dir;
  if (override_dir.empty() && p.is_relative()) {
    if (const char* root = std::getenv("KSCONS_OUTPUT_ROOT"); root && *root) p = std::filesystem::path(root) / p;
  }
  return p;
}

inline void write_run_artifacts(const std::filesystem::path& dir, const Scenario& sc, const Evaluation& ev) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "timeseries.csv");
    write_timeseries(os, ev.run.samples);
  }
  const State& s = ev.run.final_state;
  write_snapshot(dir / "u_final.csv", s.u);
  write_snapshot(dir / "v_final.csv", s.v);
  write_snapshot(dir / "A_final.csv", accumulated_A(s));
  std::ofstream os(dir / "report.json");
  os << std::setw(2) << report_json(sc, ev) << '\n';
  if (!os) throw Error("cannot write " + (dir / "report.json").string());
}

// ------------------------------------------------------------------- verify

struct OrderStudy {
  std::string name;
  std::vector<double> errors;
  double order = 0.0;
  double required = 0.0;
  bool vacuous = false;  // errors at round-off level

  bool pass() const { return vacuous || order >= required; }
};

struct VerifyResult {
  std::optional<Evaluation> coarse;
  std::optional<Evaluation> fine;
  std::vector<OrderStudy> orders;
  std::string note;
  bool resolution_ok = true;

  bool pass() const {
    if (!resolution_ok || !coarse || !fine || !coarse->pass() || !fine->pass()) return false;
    return std::all_of(orders.begin(), orders.end(), [](const OrderStudy& o) { return o.pass(); });
  }
};

struct ProbeResult {
  State final_state;
  double weak_residual = 0.0;
};

// Runs to t_end accumulating the mode-1 weak-form residual with the trapezoid
// rule over every scheme step.
inline ProbeResult probe_trajectory(const Field& u_in, const Field& v_in, const Motility& m, SchemeParams p) {
  p.v_l1_stop = 0.0;
  const Field lap_theta = laplacian_neumann(cosine_mode(u_in.grid(), 1));
  auto integrand = [&](const State& s) {
    Field w(u_in.grid());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = s.u[k] * m.gamma(std::max(s.v[k], 0.0));
    return inner(w, lap_theta);
  };
  State s = initial_state(u_in, v_in, m);
  double prev = integrand(s), flux = 0.0;
  while (s.t < p.t_end) {
    s = step(s, m, p);
    const double cur = integrand(s);
    flux += 0.5 * s.last_dt * (prev + cur);
    prev = cur;
  }
  const double lhs = inner(s.u - u_in, cosine_mode(u_in.grid(), 1));
  return {std::move(s), std::abs(lhs - flux)};
}

inline OrderStudy make_order(std::string name, std::vector<double> errors, double required, bool from_differences,
                             double scale) {
  OrderStudy o;
  o.name = std::move(name);
  o.errors = std::move(errors);
  o.required = required;
  const double floor = 1e-13 * std::max(scale, 1.0);
  o.vacuous = std::all_of(o.errors.begin(), o.errors.end(), [&](double e) { return e <= floor; });
  if (o.vacuous) {
    o.order = std::numeric_limits<double>::quiet_NaN();
  } else if (from_differences) {
    o.order = std::log2(o.errors[0] / o.errors[1]);
  } else {
    o.order = kInfinity;
    for (std::size_t k = 1; k < o.errors.size(); ++k) o.order = std::min(o.order, std::log2(o.errors[k - 1] / o.errors[k]));
  }
  if (std::isnan(o.order) && !o.vacuous) o.order = -kInfinity;
  return o;
}

inline ScenarioConfig refined_config(ScenarioConfig c, int factor) {
  for (int a = 0; a < c.dim; ++a) c.cells[a] *= factor;
  if (std::isfinite(c.scheme.dt_max)) c.scheme.dt_max /= static_cast<double>(factor) * factor;
  return c;
}

// Full checks at h and h/2; spatial order from h, h/2, h/4 with dt tied to
// h^2 by the stability bound; temporal and weak-form orders at dt, dt/2, dt/4
// on the base grid. All refinement runs stop at t_compare.
inline VerifyResult verify(const ScenarioConfig& cfg) {
  VerifyResult vr;
  for (int a = 0; a < cfg.dim; ++a) {
    if (cfg.cells[a] < cfg.min_cells) {
      vr.resolution_ok = false;
      vr.note = "under-resolved: " + std::to_string(cfg.cells[a]) + " cells on axis " + std::to_string(a) +
                " is below verify.min_cells = " + std::to_string(cfg.min_cells) +
                "; refinement orders are not meaningful outside the asymptotic range";
      return vr;
    }
  }
  const Scenario base = Scenario::from(cfg);
  vr.coarse = evaluate(base);
  vr.fine = evaluate(Scenario::from(refined_config(cfg, 2)));

  const double T = std::min(cfg.t_compare, base.params.t_end);
  const double scale = lp_norm(base.u_in, 2.0) + lp_norm(base.v_in, 2.0);
  auto field_error = [](const State& coarse, const State& fine) {
    const Grid& g = coarse.u.grid();
    return lp_norm(restrict_to(fine.u, g) - coarse.u, 2.0) + lp_norm(restrict_to(fine.v, g) - coarse.v, 2.0);
  };

  std::vector<State> space;
  for (int f : {1, 2, 4}) {
    const Scenario s = Scenario::from(refined_config(cfg, f));
    SchemeParams p = s.params;
    p.t_end = T;
    space.push_back(probe_trajectory(s.u_in, s.v_in, s.gamma, p).final_state);
  }
  vr.orders.push_back(make_order("spatial", {field_error(space[0], space[1]), field_error(space[1], space[2])}, 1.8,
                                 true, scale));

  const double dt_stable = stable_dt(base.grid, initial_state(base.u_in, base.v_in, base.gamma).gamma_bound,
                                     base.params.cfl_safety);
  const double dt0 = T / std::ceil(T / std::min(dt_stable, base.params.dt_max));
  std::vector<ProbeResult> time;
  for (int k = 0; k < 3; ++k) {
    SchemeParams p = base.params;
    p.t_end = T;
    p.dt_max = dt0 / (1 << k);
    time.push_back(probe_trajectory(base.u_in, base.v_in, base.gamma, p));
  }
  vr.orders.push_back(make_order("temporal",
                                 {field_error(time[0].final_state, time[1].final_state),
                                  field_error(time[1].final_state, time[2].final_state)},
                                 0.9, true, scale));
  vr.orders.push_back(make_order("weak_form_dt",
                                 {time[0].weak_residual, time[1].weak_residual, time[2].weak_residual}, 0.9, false,
                                 scale));
  return vr;
}

inline json verify_json(const ScenarioConfig& cfg, const VerifyResult& vr) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = cfg.name;
  j["resolution_ok"] = vr.resolution_ok;
  j["note"] = vr.note;
  j["orders"] = json::array();
  for (const auto& o : vr.orders)
    j["orders"].push_back({{"name", o.name},
                           {"errors", o.errors},
                           {"order", o.order},
                           {"required", o.required},
                           {"vacuous", o.vacuous},
                           {"pass", o.pass()}});
  auto checks = [](const std::optional<Evaluation>& ev) {
    json a = json::array();
    if (ev)
      for (const auto& c : ev->checks) a.push_back(to_json(c));
    return a;
  };
  j["checks_h"] = checks(vr.coarse);
  j["checks_h_half"] = checks(vr.fine);
  j["pass"] = vr.pass();
  return j;
}

// -------------------------------------------------------------------- sweep

struct SweepAxis {
  std::string param;  // "v_in" (constant value) or "gamma.alpha"
  std::vector<double> values;
};

struct SweepRow {
  std::vector<double> params;
  bool ok = false;
  std::string error;
  std::string stop_reason;
  double t_final = 0.0;
  double dist_dual_sq = 0.0;
  double product_bound = 0.0;
  double spread_sq = 0.0;
  bool smalldist_holds = false;
  bool certified_nonconstant = false;
  double nonconst_dual = 0.0;
  bool checks_pass = false;
};

inline void apply_param(ScenarioConfig& c, const std::string& param, double value) {
  if (param == "v_in") {
    if (value < 0.0) throw ConfigError("sweep: v_in must be nonnegative");
    c.v_in = InitialSpec{};
    c.v_in.value = value;
  } else if (param == "gamma.alpha") {
    c.gamma = GammaSpec{};
    c.gamma.alpha = value;
  } else {
    throw ConfigError("sweep: unknown parameter '" + param + "' (expected v_in or gamma.alpha)");
  }
}

inline SweepRow sweep_one(ScenarioConfig c, const std::vector<SweepAxis>& axes, const std::vector<double>& point) {
  SweepRow row;
  row.params = point;
  try {
    for (std::size_t a = 0; a < axes.size(); ++a) apply_param(c, axes[a].param, point[a]);
    c.checks.a_convergence = c.checks.weak_form = false;
    const Scenario sc = Scenario::from(c);
    const Evaluation ev = evaluate(sc);
    row.stop_reason = to_string(ev.run.stop_reason);
    row.t_final = ev.run.final_state.t;
    row.product_bound = ev.product_bound;
    row.spread_sq = ev.spread_sq;
    row.checks_pass = ev.pass();
    if (ev.limit) {
      row.dist_dual_sq = ev.limit->dist_dual * ev.limit->dist_dual;
      row.nonconst_dual = ev.limit->nonconst_dual;
      row.certified_nonconstant = ev.limit->certified_nonconstant;
      row.smalldist_holds = ev.prop2 && ev.prop2->smalldist_holds;
      row.ok = true;
    } else {
      row.error = ev.run.error.empty() ? "limit not reached" : ev.run.error;
    }
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

// Cartesian product of the axes, evaluated by up to `workers` threads. Rows
// come back in product order (last axis fastest). An axis with no values
// yields no rows.
inline std::vector<SweepRow> sweep(const ScenarioConfig& base, const std::vector<SweepAxis>& axes, int workers = 1) {
  for (const auto& a : axes) {
    ScenarioConfig probe = base;
    apply_param(probe, a.param, a.values.empty() ? 0.0 : std::abs(a.values.front()));
  }
  std::vector<std::vector<double>> points{{}};
  for (const auto& a : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& p : points)
      for (double v : a.values) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  if (axes.empty()) points.clear();
  std::vector<SweepRow> rows(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < points.size();) rows[k] = sweep_one(base, axes, points[k]);
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepAxis>& axes, const std::vector<SweepRow>& rows) {
  for (const auto& a : axes) os << a.param << ',';
  os << "status,stop_reason,t_final,dist_dual_sq,product_bound,spread_sq,smalldist_holds,certified_nonconstant,"
        "nonconst_dual,checks_pass,error\n";
  for (const auto& r : rows) {
    for (double p : r.params) os << format_double(p) << ',';
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << (r.ok ? "ok" : "failed") << ',' << r.stop_reason << ',' << format_double(r.t_final) << ','
       << format_double(r.dist_dual_sq) << ',' << format_double(r.product_bound) << ',' << format_double(r.spread_sq)
       << ',' << r.smalldist_holds << ',' << r.certified_nonconstant << ',' << format_double(r.nonconst_dual) << ','
       << r.checks_pass << ',' << err << '\n';
  }
}

// ------------------------------------------------------------------- report

inline json read_report(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(dir.string() + ": not a directory");
  const auto path = dir / "report.json";
  std::ifstream is(path);
  if (!is) throw Error(dir.string() + ": no report.json found");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error(path.string() + ": corrupt report (" + e.what() + ")");
  }
  if (!j.is_object() || !j.contains("checks") || !j["checks"].is_array())
    throw Error(path.string() + ": corrupt report (no check list)");
  return j;
}

inline std::string format_cell(const json& x) {
  if (x.is_number()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4e", x.get<double>());
    return buf;
  }
  if (x.is_null()) return "nan";
  return x.dump();
}

// Prints the check table and writes <dir>/envelope.csv (t, v_l1, envelope).
// Returns whether every non-informative check passed.
inline bool render_report(const std::filesystem::path& dir, std::ostream& os) {
  const json j = read_report(dir);
  os << std::left << std::setw(26) << "check" << std::setw(12) << "eq" << std::setw(13) << "lhs" << std::setw(13)
     << "rhs" << std::setw(13) << "slack" << "status\n";
  bool all = true;
  for (const auto& c : j["checks"]) {
    const bool info = c.value("informative", false);
    const bool pass = c.value("pass", false);
    if (!info && !pass) all = false;
    os << std::left << std::setw(26) << c.value("name", std::string("?")) << std::setw(12)
       << c.value("paper_eq", std::string("?")) << std::setw(13) << format_cell(c["lhs"]) << std::setw(13)
       << format_cell(c["rhs"]) << std::setw(13) << format_cell(c["slack"])
       << (info ? "info" : (pass ? "PASS" : "FAIL")) << '\n';
  }
  if (j.contains("limit") && j["limit"].is_object()) {
    const auto& l = j["limit"];
    os << "dist_dual^2 " << format_cell(l["dist_dual_sq"]) << "  nonconst_dual " << format_cell(l["nonconst_dual"])
       << "  certified_nonconstant " << (l.value("certified_nonconstant", false) ? "yes" : "no") << '\n';
  }
  std::ofstream env(dir / "envelope.csv");
  env << "t,v_l1,envelope\n";
  if (j.contains("envelope"))
    for (const auto& r : j["envelope"])
      env << format_double(r.value("t", 0.0)) << ',' << format_double(r.value("v_l1", 0.0)) << ','
          << format_double(r.value("envelope", 0.0)) << '\n';
  os << (all ? "all checks pass" : "some checks FAIL") << '\n';
  return all;
}

}  // namespace kscons
