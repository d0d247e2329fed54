#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <thread>

#include "kscons/scenario.hpp"

using namespace kscons;

namespace {

struct Overrides {
  double poisson_tol = 0.0;
  double t_end = 0.0;
  double v_l1_stop = -1.0;
  std::string out;
};

ScenarioConfig load(const std::string& path, const Overrides& o) {
  ScenarioConfig c = load_config(path);
  if (o.poisson_tol > 0.0) c.poisson_tol = o.poisson_tol;
  if (o.t_end > 0.0) c.scheme.t_end = o.t_end;
  if (o.v_l1_stop >= 0.0) c.v_l1_stop = o.v_l1_stop;
  return c;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : detail::split(s, ',')) {
    if (item.empty()) continue;
    out.push_back(detail::parse_double(item, "sweep value"));
  }
  return out;
}

void print_checks(const Evaluation& ev) {
  for (const auto& c : ev.checks) {
    std::printf("%-26s %-12s lhs=%-12.4e rhs=%-12.4e slack=%-11.3e %s\n", c.name.c_str(), c.paper_eq.c_str(), c.lhs,
                c.rhs, c.slack, c.informative ? "info" : (c.pass() ? "PASS" : "FAIL"));
  }
}

int cmd_run(const std::string& path, const Overrides& o) {
  const ScenarioConfig cfg = load(path, o);
  const Scenario sc = Scenario::from(cfg);
  const Evaluation ev = evaluate(sc);
  const auto dir = resolve_output_dir(cfg, o.out);
  write_run_artifacts(dir, sc, ev);
  std::printf("%s: %s at t=%.6g after %ld steps (%.2fs)\n", cfg.name.c_str(), to_string(ev.run.stop_reason),
              ev.run.final_state.t, ev.run.final_state.step_count, ev.runtime_s);
  if (!ev.run.error.empty()) std::printf("error: %s (last good state written)\n", ev.run.error.c_str());
  print_checks(ev);
  std::printf("artifacts in %s\n", dir.string().c_str());
  return ev.pass() ? 0 : 1;
}

int cmd_verify(const std::string& path, const Overrides& o) {
  const ScenarioConfig cfg = load(path, o);
  const VerifyResult vr = verify(cfg);
  if (!vr.resolution_ok) {
    std::printf("FAIL %s\n", vr.note.c_str());
  } else {
    std::printf("checks at h: %s, at h/2: %s\n", vr.coarse->pass() ? "PASS" : "FAIL", vr.fine->pass() ? "PASS" : "FAIL");
    for (const auto* ev : {&*vr.coarse, &*vr.fine})
      for (const auto& c : ev->checks)
        if (!c.informative && !c.pass()) std::printf("  failing: %s (%s) slack %.3e\n", c.name.c_str(), c.paper_eq.c_str(), c.slack);
    for (const auto& ord : vr.orders) {
      std::printf("%-13s order %-8.4f required %.2f errors", ord.name.c_str(), ord.order, ord.required);
      for (double e : ord.errors) std::printf(" %.4e", e);
      std::printf(" %s%s\n", ord.pass() ? "PASS" : "FAIL", ord.vacuous ? " (vacuous)" : "");
    }
  }
  if (!o.out.empty() || !cfg.output_dir.empty()) {
    const auto dir = resolve_output_dir(cfg, o.out);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "verify.json") << std::setw(2) << verify_json(cfg, vr) << '\n';
  }
  std::printf("%s\n", vr.pass() ? "verify PASS" : "verify FAIL");
  return vr.pass() ? 0 : 1;
}

int cmd_sweep(const std::string& path, const Overrides& o, const std::vector<std::string>& params,
              const std::vector<std::string>& values, int workers) {
  if (params.size() != values.size()) throw ConfigError("sweep: every --param needs one --values list");
  const ScenarioConfig cfg = load(path, o);
  std::vector<SweepAxis> axes;
  for (std::size_t k = 0; k < params.size(); ++k) axes.push_back({params[k], parse_values(values[k])});
  const auto rows = sweep(cfg, axes, workers);
  const std::filesystem::path dir = resolve_output_dir(cfg, o.out);
  std::filesystem::create_directories(dir);
  const auto file = dir / "sweep.csv";
  std::ofstream os(file);
  write_sweep_csv(os, axes, rows);
  write_sweep_csv(std::cout, axes, rows);
  std::printf("wrote %s (%zu rows)\n", file.string().c_str(), rows.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kscons: conservative chemotaxis-consumption simulations and bound checks"};
  app.require_subcommand(1);
  Overrides o;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string config, dir;
  std::vector<std::string> params, values;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "scenario file (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--poisson-tol", o.poisson_tol, "tolerance of the Neumann Poisson solves");
    sub->add_option("--t-end", o.t_end, "final time");
    sub->add_option("--v-l1-stop", o.v_l1_stop, "stop once ||v||_1 falls below this");
    sub->add_option("--out", o.out, "output directory (default from config, under $KSCONS_OUTPUT_ROOT)");
  };
  auto* run_cmd = app.add_subcommand("run", "run a scenario, write time series, snapshots and report.json");
  add_common(run_cmd);
  auto* verify_cmd = app.add_subcommand("verify", "checks at h and h/2 plus refinement orders");
  add_common(verify_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "cartesian parameter sweep, aggregate CSV");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--param", params, "v_in or gamma.alpha (repeatable)")->take_all();
  sweep_cmd->add_option("--values", values, "comma-separated values, one list per --param")->take_all();
  sweep_cmd->add_option("--workers", workers, "concurrent runs")->check(CLI::PositiveNumber);
  auto* report_cmd = app.add_subcommand("report", "render report.json of a run directory");
  report_cmd->add_option("dir", dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(config, o);
    if (*verify_cmd) return cmd_verify(config, o);
    if (*sweep_cmd) return cmd_sweep(config, o, params, values, workers);
    if (*report_cmd) return render_report(dir, std::cout) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
