#pragma once

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kscons/diagnostics.hpp"
#include "kscons/elliptic.hpp"
#include "kscons/field_io.hpp"
#include "kscons/motility.hpp"
#include "kscons/solver.hpp"

namespace kscons {

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kSchemaVersion = 1;

struct InitialSpec {
  enum class Kind { constant, cosine, snapshot };
  Kind kind = Kind::constant;
  double value = 0.0;  // constant
  double mean = 0.0;   // cosine
  double amplitude = 0.0;
  int mode[2] = {1, 1};
  std::string file;  // snapshot, resolved against the config directory
};

struct GammaSpec {
  enum class Kind { power, power_sum, table };
  Kind kind = Kind::power;
  double alpha = 1.0;
  std::vector<PowerTerm> terms;
  std::string file;
};

struct ChecksEnabled {
  bool conservation = true;
  bool ledger = true;
  bool a_bounds = true;
  bool identity = true;
  bool dissipation = true;
  bool envelope = true;
  bool limit = true;
  bool v_decay = true;
  bool a_convergence = true;
  bool weak_form = true;
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::string name;
  std::filesystem::path source;  // file the config was read from, if any
  int dim = 1;
  double extent[2] = {1.0, 1.0};
  int cells[2] = {64, 1};
  InitialSpec u_in;
  InitialSpec v_in;
  GammaSpec gamma;
  SchemeParams scheme;
  std::optional<double> v_l1_stop;  // default: 1e-8 ||v^in||_1
  double poisson_tol = kDefaultPoissonTol;
  PoissonMethod poisson_method = PoissonMethod::conjugate_gradient;
  int sample_count = 100;
  std::vector<double> sample_times;  // overrides sample_count when non-empty
  std::string output_dir;
  ChecksEnabled checks;
  double tol_discretization = kDefaultDiscretizationTol;
  double t_compare = 1.0;
  int min_cells = 8;

  Grid grid() const { return Grid::make(dim, {extent[0], extent[1]}, {cells[0], cells[1]}); }
};

namespace detail {

inline std::string where(const std::string& file, const YAML::Node& n) {
  std::string w = file.empty() ? std::string("<config>") : file;
  if (n.Mark().line >= 0) w += ":" + std::to_string(n.Mark().line + 1);
  return w;
}

class Reader {
 public:
  explicit Reader(std::string file) : file_(std::move(file)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    throw ConfigError(where(file_, n) + ": " + msg);
  }

  void only_keys(const YAML::Node& n, std::initializer_list<const char*> allowed, const std::string& ctx) const {
    if (!n.IsMap()) fail(n, ctx + " must be a mapping");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (!ok.count(key)) fail(kv.first, "unknown key '" + key + "' in " + ctx);
    }
  }

  template <class T>
  T get(const YAML::Node& n, const std::string& what) const {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, "invalid value for " + what);
    }
  }

  double number(const YAML::Node& n, const std::string& what) const {
    if (n.IsScalar()) {
      const auto s = n.Scalar();
      if (s == "inf" || s == ".inf") return kInfinity;
    }
    const double x = get<double>(n, what);
    if (std::isnan(x)) fail(n, what + " must be a number");
    return x;
  }

  double positive(const YAML::Node& n, const std::string& what) const {
    const double x = number(n, what);
    if (!(x > 0.0)) fail(n, what + " must be positive");
    return x;
  }

  std::vector<double> numbers(const YAML::Node& n, const std::string& what) const {
    if (n.IsScalar()) return {number(n, what)};
    if (!n.IsSequence()) fail(n, what + " must be a number or a list of numbers");
    std::vector<double> out;
    for (const auto& e : n) out.push_back(number(e, what));
    return out;
  }

  const std::string& file() const { return file_; }

 private:
  std::string file_;
};

inline InitialSpec read_initial(const Reader& r, const YAML::Node& n, const std::string& ctx, int dim,
                                const std::filesystem::path& base) {
  InitialSpec s;
  if (n.IsScalar()) {
    s.value = r.number(n, ctx);
    if (!(s.value >= 0.0) || !std::isfinite(s.value)) r.fail(n, ctx + " must be finite and nonnegative");
    return s;
  }
  if (!n.IsMap() || !n["kind"]) r.fail(n, ctx + " needs a 'kind' (constant, cosine or snapshot)");
  const auto kind = r.get<std::string>(n["kind"], ctx + ".kind");
  if (kind == "constant") {
    r.only_keys(n, {"kind", "value"}, ctx);
    if (!n["value"]) r.fail(n, ctx + ": constant needs 'value'");
    s.value = r.number(n["value"], ctx + ".value");
  } else if (kind == "cosine") {
    r.only_keys(n, {"kind", "mean", "amplitude", "mode"}, ctx);
    s.kind = InitialSpec::Kind::cosine;
    if (!n["mean"] || !n["amplitude"]) r.fail(n, ctx + ": cosine needs 'mean' and 'amplitude'");
    s.mean = r.number(n["mean"], ctx + ".mean");
    s.amplitude = r.number(n["amplitude"], ctx + ".amplitude");
    if (const auto m = n["mode"]) {
      if (m.IsSequence()) {
        if (static_cast<int>(m.size()) != dim) r.fail(m, ctx + ".mode needs one entry per axis");
        for (int a = 0; a < dim; ++a) s.mode[a] = r.get<int>(m[a], ctx + ".mode");
      } else {
        s.mode[0] = s.mode[1] = r.get<int>(m, ctx + ".mode");
      }
      for (int a = 0; a < dim; ++a)
        if (s.mode[a] < 0) r.fail(m, ctx + ".mode must be nonnegative");
    }
    if (s.mean - std::abs(s.amplitude) < 0.0)
      r.fail(n, ctx + " takes negative values (mean - |amplitude| < 0); initial data must be nonnegative");
  } else if (kind == "snapshot") {
    r.only_keys(n, {"kind", "file"}, ctx);
    s.kind = InitialSpec::Kind::snapshot;
    if (!n["file"]) r.fail(n, ctx + ": snapshot needs 'file'");
    std::filesystem::path p = r.get<std::string>(n["file"], ctx + ".file");
    s.file = (p.is_absolute() ? p : base / p).string();
  } else {
    r.fail(n["kind"], "unknown " + ctx + ".kind '" + kind + "'");
  }
  if (s.kind == InitialSpec::Kind::constant && (!(s.value >= 0.0) || !std::isfinite(s.value)))
    r.fail(n, ctx + " must be finite and nonnegative");
  return s;
}

inline GammaSpec read_gamma(const Reader& r, const YAML::Node& n, const std::filesystem::path& base) {
  GammaSpec g;
  if (!n.IsMap() || !n["kind"]) r.fail(n, "gamma needs a 'kind' (power, power_sum or table)");
  const auto kind = r.get<std::string>(n["kind"], "gamma.kind");
  if (kind == "power") {
    r.only_keys(n, {"kind", "alpha"}, "gamma");
    if (n["alpha"]) g.alpha = r.number(n["alpha"], "gamma.alpha");
  } else if (kind == "power_sum") {
    r.only_keys(n, {"kind", "terms"}, "gamma");
    g.kind = GammaSpec::Kind::power_sum;
    const auto t = n["terms"];
    if (!t || !t.IsSequence() || t.size() == 0) r.fail(n, "gamma.terms must be a non-empty list of [coefficient, exponent]");
    for (const auto& e : t) {
      if (!e.IsSequence() || e.size() != 2) r.fail(e, "each gamma term is [coefficient, exponent]");
      g.terms.push_back({r.number(e[0], "gamma coefficient"), r.number(e[1], "gamma exponent")});
    }
  } else if (kind == "table") {
    r.only_keys(n, {"kind", "file"}, "gamma");
    g.kind = GammaSpec::Kind::table;
    if (!n["file"]) r.fail(n, "gamma table needs 'file'");
    std::filesystem::path p = r.get<std::string>(n["file"], "gamma.file");
    g.file = (p.is_absolute() ? p : base / p).string();
  } else {
    r.fail(n["kind"], "unknown gamma.kind '" + kind + "'");
  }
  return g;
}

inline void read_checks(const Reader& r, const YAML::Node& n, ChecksEnabled& c) {
  r.only_keys(n,
              {"conservation", "ledger", "A_bounds", "identity", "dissipation", "envelope", "limit", "v_decay",
               "A_convergence", "weak_form"},
              "checks");
  auto flag = [&](const char* key, bool& dst) {
    if (n[key]) dst = r.get<bool>(n[key], std::string("checks.") + key);
  };
  flag("conservation", c.conservation);
  flag("ledger", c.ledger);
  flag("A_bounds", c.a_bounds);
  flag("identity", c.identity);
  flag("dissipation", c.dissipation);
  flag("envelope", c.envelope);
  flag("limit", c.limit);
  flag("v_decay", c.v_decay);
  flag("A_convergence", c.a_convergence);
  flag("weak_form", c.weak_form);
}

}  // namespace detail

// YAML scenario file. Relative file references are resolved against the
// directory of `file`. Errors carry file:line.
inline ScenarioConfig parse_config(const std::string& text, const std::string& file = {}) {
  using detail::Reader;
  const Reader r(file);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError((file.empty() ? std::string("<config>") : file) + ":" + std::to_string(e.mark.line + 1) +
                      ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError((file.empty() ? std::string("<config>") : file) + ": expected a mapping");
  r.only_keys(root,
              {"schema_version", "name", "grid", "initial", "gamma", "scheme", "poisson", "samples", "output_dir",
               "checks", "tol_discretization", "verify"},
              "config");

  ScenarioConfig c;
  c.source = file;
  const std::filesystem::path base = file.empty() ? std::filesystem::path(".")
                                                  : std::filesystem::path(file).parent_path();
  if (!root["schema_version"]) r.fail(root, "missing schema_version");
  c.schema_version = r.get<int>(root["schema_version"], "schema_version");
  if (c.schema_version != kSchemaVersion)
    r.fail(root["schema_version"], "unsupported schema_version " + std::to_string(c.schema_version));
  if (root["name"]) c.name = r.get<std::string>(root["name"], "name");
  else if (!file.empty()) c.name = std::filesystem::path(file).stem().string();

  const auto grid = root["grid"];
  if (!grid) r.fail(root, "missing grid");
  r.only_keys(grid, {"dim", "extent", "cells"}, "grid");
  if (grid["dim"]) c.dim = r.get<int>(grid["dim"], "grid.dim");
  if (c.dim != 1 && c.dim != 2) r.fail(grid, "grid.dim must be 1 or 2");
  if (!grid["cells"]) r.fail(grid, "missing grid.cells");
  {
    const auto ext = grid["extent"] ? r.numbers(grid["extent"], "grid.extent") : std::vector<double>(c.dim, 1.0);
    const auto cells = r.numbers(grid["cells"], "grid.cells");
    if (static_cast<int>(ext.size()) != c.dim && ext.size() != 1) r.fail(grid["extent"], "grid.extent needs one entry per axis");
    if (static_cast<int>(cells.size()) != c.dim && cells.size() != 1) r.fail(grid["cells"], "grid.cells needs one entry per axis");
    for (int a = 0; a < c.dim; ++a) {
      c.extent[a] = ext.size() == 1 ? ext[0] : ext[a];
      const double n = cells.size() == 1 ? cells[0] : cells[a];
      if (!(c.extent[a] > 0.0)) r.fail(grid["extent"], "grid.extent must be positive");
      if (!(n >= 1.0) || n != std::floor(n)) r.fail(grid["cells"], "grid.cells must be positive integers");
      c.cells[a] = static_cast<int>(n);
    }
  }

  const auto init = root["initial"];
  if (!init) r.fail(root, "missing initial");
  r.only_keys(init, {"u", "v"}, "initial");
  if (!init["u"] || !init["v"]) r.fail(init, "initial needs both 'u' and 'v'");
  c.u_in = detail::read_initial(r, init["u"], "initial.u", c.dim, base);
  c.v_in = detail::read_initial(r, init["v"], "initial.v", c.dim, base);

  if (!root["gamma"]) r.fail(root, "missing gamma");
  c.gamma = detail::read_gamma(r, root["gamma"], base);

  if (const auto s = root["scheme"]) {
    r.only_keys(s, {"t_end", "dt_max", "cfl_safety", "v_l1_stop", "linear_tol", "linear_solver"}, "scheme");
    if (s["t_end"]) c.scheme.t_end = r.positive(s["t_end"], "scheme.t_end");
    if (s["dt_max"]) c.scheme.dt_max = r.positive(s["dt_max"], "scheme.dt_max");
    if (s["cfl_safety"]) {
      c.scheme.cfl_safety = r.positive(s["cfl_safety"], "scheme.cfl_safety");
      if (c.scheme.cfl_safety > 1.0) r.fail(s["cfl_safety"], "scheme.cfl_safety must lie in (0, 1]");
    }
    if (s["v_l1_stop"]) {
      c.v_l1_stop = r.number(s["v_l1_stop"], "scheme.v_l1_stop");
      if (*c.v_l1_stop < 0.0) r.fail(s["v_l1_stop"], "scheme.v_l1_stop must be nonnegative");
    }
    if (s["linear_tol"]) c.scheme.linear_tol = r.positive(s["linear_tol"], "scheme.linear_tol");
    if (s["linear_solver"]) {
      const auto ls = r.get<std::string>(s["linear_solver"], "scheme.linear_solver");
      if (ls == "automatic") c.scheme.linear_solver = LinearSolver::automatic;
      else if (ls == "direct") c.scheme.linear_solver = LinearSolver::direct;
      else if (ls == "conjugate_gradient") c.scheme.linear_solver = LinearSolver::conjugate_gradient;
      else r.fail(s["linear_solver"], "unknown scheme.linear_solver '" + ls + "'");
    }
  }
  if (c.scheme.linear_solver == LinearSolver::direct && c.dim != 1)
    r.fail(root["scheme"], "the direct linear solver is 1D only");

  if (const auto p = root["poisson"]) {
    r.only_keys(p, {"tol", "method"}, "poisson");
    if (p["tol"]) c.poisson_tol = r.positive(p["tol"], "poisson.tol");
    if (p["method"]) {
      const auto m = r.get<std::string>(p["method"], "poisson.method");
      if (m == "conjugate_gradient") c.poisson_method = PoissonMethod::conjugate_gradient;
      else if (m == "cosine_transform") c.poisson_method = PoissonMethod::cosine_transform;
      else r.fail(p["method"], "unknown poisson.method '" + m + "'");
    }
  }

  if (const auto s = root["samples"]) {
    r.only_keys(s, {"count", "times"}, "samples");
    if (s["count"] && s["times"]) r.fail(s, "samples takes either 'count' or 'times'");
    if (s["count"]) {
      c.sample_count = r.get<int>(s["count"], "samples.count");
      if (c.sample_count < 0) r.fail(s["count"], "samples.count must be nonnegative");
    }
    if (s["times"]) {
      c.sample_times = r.numbers(s["times"], "samples.times");
      for (double t : c.sample_times)
        if (!(t > 0.0)) r.fail(s["times"], "sample times must be positive");
    }
  }

  if (root["output_dir"]) c.output_dir = r.get<std::string>(root["output_dir"], "output_dir");
  if (root["checks"]) detail::read_checks(r, root["checks"], c.checks);
  if (root["tol_discretization"]) c.tol_discretization = r.positive(root["tol_discretization"], "tol_discretization");
  if (const auto v = root["verify"]) {
    r.only_keys(v, {"t_compare", "min_cells"}, "verify");
    if (v["t_compare"]) c.t_compare = r.positive(v["t_compare"], "verify.t_compare");
    if (v["min_cells"]) c.min_cells = r.get<int>(v["min_cells"], "verify.min_cells");
  }
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

inline Field make_initial(const InitialSpec& s, const Grid& g, const std::string& what) {
  Field f(g);
  switch (s.kind) {
    case InitialSpec::Kind::constant:
      f = Field(g, s.value);
      break;
    case InitialSpec::Kind::cosine: {
      const double pi = std::numbers::pi;
      if (g.dim == 1) {
        f = Field::from_function(g, [&](double x) { return s.mean + s.amplitude * std::cos(pi * s.mode[0] * x / g.extent[0]); });
      } else {
        f = Field::from_function(g, [&](double x, double y) {
          return s.mean + s.amplitude * std::cos(pi * s.mode[0] * x / g.extent[0]) *
                              std::cos(pi * s.mode[1] * y / g.extent[1]);
        });
      }
      break;
    }
    case InitialSpec::Kind::snapshot:
      f = read_snapshot(s.file);
      if (!(f.grid() == g)) throw ConfigError(what + ": snapshot " + s.file + " does not match the configured grid");
      break;
  }
  if (!f.is_finite()) throw ConfigError(what + " is not finite");
  if (f.min() < 0.0) throw ConfigError(what + " is negative somewhere; initial data must be nonnegative");
  return f;
}

inline Motility make_motility(const GammaSpec& s, double s_max) {
  s_max = std::max(s_max, 1e-12);
  switch (s.kind) {
    case GammaSpec::Kind::power: return Motility::power(s.alpha, s_max);
    case GammaSpec::Kind::power_sum: return Motility::power_sum(s.terms, s_max);
    case GammaSpec::Kind::table: return Motility::table_from_csv(s.file);
  }
  throw ConfigError("unknown gamma kind");
}

}  // namespace kscons
