#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kscons/scenario.hpp"

using namespace kscons;

namespace {

ScenarioConfig shipped(const std::string& name) {
  return load_config(std::string(KSCONS_SOURCE_DIR) + "/scenarios/" + name + ".yaml");
}

ScenarioConfig small_s1(int cells = 32) {
  ScenarioConfig c = shipped("s1");
  c.cells[0] = cells;
  c.sample_count = 40;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Evaluate, StationaryHasZeroResiduals) {
  const Scenario sc = Scenario::from(shipped("stationary"));
  const Evaluation ev = evaluate(sc);
  EXPECT_TRUE(ev.pass());
  EXPECT_EQ(ev.run.final_state.u, sc.u_in);
  for (const auto& s : ev.run.samples) {
    EXPECT_EQ(s.b9_residual, 0.0);
    EXPECT_EQ(s.energy_residual, 0.0);
    EXPECT_EQ(s.v_l1, 0.0);
  }
  ASSERT_TRUE(ev.limit);
  EXPECT_EQ(ev.limit->dist_dual, 0.0);
}

TEST(Evaluate, S1ChecksPassAndCoverEveryBound) {
  const Evaluation ev = evaluate(Scenario::from(small_s1()));
  EXPECT_TRUE(ev.pass());
  EXPECT_EQ(ev.run.stop_reason, StopReason::v_exhausted);
  for (const char* name : {"mass_conservation", "v_max_principle", "uv_cumulative", "A_l1_bound", "grad_A_bound",
                           "auxiliary_identity", "absorption_ledger", "l2_dissipation", "v_l1_envelope",
                           "envelope_tail", "limit_mean", "limit_nonnegative", "grad_A_inf_bound", "limit_distance",
                           "smalldist_condition", "v_decay_l1", "A_convergence", "weak_form_identity"})
    EXPECT_NE(ev.find(name), nullptr) << name;
  EXPECT_TRUE(ev.find("smalldist_condition")->informative);
  EXPECT_EQ(ev.find("limit_distance")->paper_eq, "dist");
}

TEST(Evaluate, ShortRunReportsLimitNotReached) {
  ScenarioConfig c = small_s1();
  c.scheme.t_end = 0.5;
  const Evaluation ev = evaluate(Scenario::from(c));
  ASSERT_NE(ev.find("limit_reached"), nullptr);
  EXPECT_FALSE(ev.find("limit_reached")->pass());
  EXPECT_NE(ev.find("limit_reached")->note.find("t_end"), std::string::npos);
  EXPECT_FALSE(ev.pass());
}

TEST(Evaluate, DisabledChecksAreOmitted) {
  ScenarioConfig c = small_s1();
  c.checks = ChecksEnabled{false, false, false, false, false, false, false, false, false, false};
  const Evaluation ev = evaluate(Scenario::from(c));
  EXPECT_TRUE(ev.checks.empty());
  EXPECT_TRUE(ev.pass());
}

TEST(Artifacts, TimeSeriesIsDeterministicAndHasFixedHeader) {
  const Scenario sc = Scenario::from(small_s1());
  std::stringstream a, b;
  write_timeseries(a, evaluate(sc).run.samples);
  write_timeseries(b, evaluate(sc).run.samples);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("t,mass_u,v_l1,v_l2,v_linf,uv_l1_cumulative,grad_A_sq,A_l1,b9_residual,energy_residual,dt\n", 0), 0u);
}

TEST(Artifacts, RunDirectoryRoundTrip) {
  const auto dir = temp_dir("kscons_run_artifacts");
  const Scenario sc = Scenario::from(small_s1());
  const Evaluation ev = evaluate(sc);
  write_run_artifacts(dir, sc, ev);
  for (const char* f : {"timeseries.csv", "u_final.csv", "v_final.csv", "A_final.csv", "report.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_EQ(read_snapshot((dir / "u_final.csv").string()), ev.run.final_state.u);
  const json j = read_report(dir);
  EXPECT_EQ(j["checks"].size(), ev.checks.size());
  EXPECT_EQ(j["pass"], true);
  EXPECT_EQ(j["config"]["scheme"]["cfl_safety"], 0.9);
  EXPECT_EQ(j["config"]["poisson"]["tol"], kDefaultPoissonTol);
  EXPECT_DOUBLE_EQ(j["limit"]["dist_dual_sq"].get<double>(), ev.limit->dist_dual * ev.limit->dist_dual);

  std::stringstream out;
  EXPECT_TRUE(render_report(dir, out));
  EXPECT_NE(out.str().find("limit_distance"), std::string::npos);
  EXPECT_NE(out.str().find("PASS"), std::string::npos);
  const std::string env = slurp(dir / "envelope.csv");
  EXPECT_EQ(env.rfind("t,v_l1,envelope\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(env.begin(), env.end(), '\n')), ev.decay.rows.size() + 1);
}

TEST(Report, MissingAndCorruptFilesAreErrors) {
  const auto dir = temp_dir("kscons_report_errors");
  std::stringstream out;
  EXPECT_THROW(render_report(dir, out), Error);
  std::ofstream(dir / "report.json") << "{ not json";
  EXPECT_THROW(render_report(dir, out), Error);
  std::ofstream(dir / "report.json") << "{\"x\": 1}";
  EXPECT_THROW(render_report(dir, out), Error);
  EXPECT_THROW(render_report(dir / "missing", out), Error);
}

TEST(Report, FailingCheckIsRenderedAsFailure) {
  const auto dir = temp_dir("kscons_report_fail");
  ScenarioConfig c = small_s1();
  c.scheme.t_end = 0.5;
  const Scenario sc = Scenario::from(c);
  write_run_artifacts(dir, sc, evaluate(sc));
  std::stringstream out;
  EXPECT_FALSE(render_report(dir, out));
  EXPECT_NE(out.str().find("FAIL"), std::string::npos);
}

TEST(Verify, UnderResolvedConfigFails) {
  const VerifyResult vr = verify(shipped("s1_coarse"));
  EXPECT_FALSE(vr.resolution_ok);
  EXPECT_FALSE(vr.pass());
  EXPECT_NE(vr.note.find("under-resolved"), std::string::npos);
}

TEST(Verify, StationaryTimeStudiesAreVacuous) {
  // Nothing moves, so time refinement changes nothing; the spatial study
  // still sees the O(h^2) difference between point-sampled initial data.
  const VerifyResult vr = verify(shipped("stationary"));
  EXPECT_TRUE(vr.pass());
  ASSERT_EQ(vr.orders.size(), 3u);
  EXPECT_FALSE(vr.orders[0].vacuous);
  EXPECT_GE(vr.orders[0].order, 1.8);
  EXPECT_TRUE(vr.orders[1].vacuous);
  EXPECT_TRUE(vr.orders[2].vacuous);
}

TEST(Verify, SmallS1MeetsOrders) {
  ScenarioConfig c = small_s1(32);
  c.t_compare = 0.5;
  const VerifyResult vr = verify(c);
  ASSERT_EQ(vr.orders.size(), 3u);
  for (const auto& o : vr.orders) EXPECT_TRUE(o.pass()) << o.name << " " << o.order;
  EXPECT_TRUE(vr.pass());
  const json j = verify_json(c, vr);
  EXPECT_EQ(j["orders"].size(), 3u);
  EXPECT_EQ(j["pass"], true);
}

TEST(Sweep, EmptyValuesGiveHeaderOnly) {
  const auto rows = sweep(small_s1(), {{"v_in", {}}});
  EXPECT_TRUE(rows.empty());
  std::stringstream os;
  write_sweep_csv(os, {{"v_in", {}}}, rows);
  const std::string csv = os.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
  EXPECT_EQ(csv.rfind("v_in,status,", 0), 0u);
}

TEST(Sweep, UnknownParameterIsRejected) {
  EXPECT_THROW(sweep(small_s1(), {{"beta", {1.0}}}), ConfigError);
}

TEST(Sweep, CartesianProductOrderAndMotilityBounds) {
  const std::vector<SweepAxis> axes{{"gamma.alpha", {1.0, 2.0}}, {"v_in", {0.1, 0.05}}};
  const auto rows = sweep(small_s1(), axes, 2);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1].params, (std::vector<double>{1.0, 0.05}));
  EXPECT_EQ(rows[2].params, (std::vector<double>{2.0, 0.1}));
  for (const auto& r : rows) EXPECT_TRUE(r.ok) << r.error;
  // sup gamma' on [0, V] is 1 for alpha = 1 and 2V for alpha = 2.
  const double u_sup = rows[0].product_bound / 0.1;
  EXPECT_NEAR(rows[1].product_bound, u_sup * 0.05, 1e-15);
  EXPECT_NEAR(rows[2].product_bound, u_sup * 0.1 * 0.2, 1e-15);
  EXPECT_NEAR(rows[3].product_bound, u_sup * 0.05 * 0.1, 1e-15);
}

TEST(Sweep, SerialAndConcurrentAgree) {
  const std::vector<SweepAxis> axes{{"v_in", {0.1, 0.01, 0.005}}};
  std::stringstream a, b;
  write_sweep_csv(a, axes, sweep(small_s1(), axes, 1));
  write_sweep_csv(b, axes, sweep(small_s1(), axes, 3));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Sweep, PerRunFailuresAreRecorded) {
  ScenarioConfig c = small_s1();
  c.scheme.t_end = 0.1;
  const auto rows = sweep(c, {{"v_in", {0.1}}});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].ok);
  EXPECT_FALSE(rows[0].error.empty());
}
