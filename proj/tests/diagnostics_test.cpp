#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kscons/diagnostics.hpp"

using namespace kscons;

namespace {

constexpr double pi = std::numbers::pi;

Field s1_u(const Grid& g) {
  return Field::from_function(g, [](double x) { return 1.0 + 0.5 * std::cos(pi * x); });
}

RunResult run_to_exhaustion(const Field& u, const Field& v, const Motility& m, double stop, int samples = 50) {
  SchemeParams p;
  p.t_end = 200.0;
  p.v_l1_stop = stop;
  return run(u, v, m, p, uniform_samples(200.0, samples), RunOptions{true});
}

}  // namespace

TEST(BoundCheck, SlackIsRelativeToRhs) {
  const BoundCheck c = make_check("x", "e", 0.9, 1.0);
  EXPECT_DOUBLE_EQ(c.slack, 0.1);
  EXPECT_TRUE(c.pass());
  const BoundCheck over = make_check("x", "e", 1.04, 1.0, 0.05);
  EXPECT_NEAR(over.slack, -0.04, 1e-15);
  EXPECT_TRUE(over.pass());
  EXPECT_FALSE(make_check("x", "e", 1.06, 1.0, 0.05).pass());
}

TEST(BoundCheck, ZeroRhsUsesAbsoluteSlack) {
  EXPECT_DOUBLE_EQ(make_check("x", "e", -2e-3, 0.0).slack, 2e-3);
  EXPECT_FALSE(make_check("x", "e", 1e-20, 0.0).pass());
  EXPECT_TRUE(make_check("x", "e", 0.0, 0.0).pass());
}

TEST(BoundCheck, WorstOfPicksSmallestSlack) {
  const BoundCheck w = worst_of({make_check("a", "e", 0.1, 1.0), make_check("a", "e", 0.7, 1.0), make_check("a", "e", 0.3, 1.0)});
  EXPECT_DOUBLE_EQ(w.lhs, 0.7);
  EXPECT_THROW(worst_of({}), Error);
}

TEST(ProductBound, S1Arithmetic) {
  const Grid g = Grid::line(1.0, 128);
  // Largest cell-centre value of 1 + 0.5 cos(pi x) sits at x = h/2.
  const double sup = 1.0 + 0.5 * std::cos(pi / 256.0);
  EXPECT_NEAR(product_bound(s1_u(g), Field(g, 0.1), Motility::power(1.0)), sup * 0.1, 1e-15);
  EXPECT_NEAR(sup * 0.1, 0.15, 1e-4 * 0.15);
  // gamma(s) = s^2: sup gamma' on [0, V] is 2V.
  EXPECT_NEAR(product_bound(Field(g, 1.5), Field(g, 0.1), Motility::power(2.0, 0.1)), 1.5 * 0.1 * 0.2, 1e-15);
}

TEST(Conservation, InitialStatePassesAndTamperingFails) {
  const Grid g = Grid::line(1.0, 32);
  const Field u = s1_u(g), v(g, 0.1);
  const Motility m = Motility::power(1.0);
  const State s = initial_state(u, v, m);
  for (const auto& c : check_conservation(s, u, v)) EXPECT_TRUE(c.pass()) << c.name;
  DiagnosticSample d = sample_state(s, u, false);
  d.mass_u *= 1.0 + 1e-9;
  d.v_linf = 0.1 + 1e-12;
  const auto cs = check_conservation(d, u, v);
  EXPECT_FALSE(cs[0].pass());
  EXPECT_FALSE(cs[1].pass());
}

TEST(AuxiliaryIdentity, StationaryIsExactlyZero) {
  const Grid g = Grid::line(1.0, 32);
  const State s = initial_state(s1_u(g), Field(g), Motility::power(1.0));
  const BoundCheck c = check_b9(s, s.u);
  EXPECT_EQ(c.lhs, 0.0);
  EXPECT_TRUE(c.pass());
}

TEST(DecayEnvelope, SkippedWhenMassIsZero) {
  const Grid g = Grid::line(1.0, 16);
  SchemeParams p;
  p.t_end = 0.1;
  const auto r = run(Field(g), Field(g, 0.2), Motility::power(1.0), p, uniform_samples(0.1, 4));
  const DecayDiagnostic d = decay_envelope(r.samples, Field(g), Field(g, 0.2), Motility::power(1.0));
  EXPECT_TRUE(d.skipped);
  EXPECT_TRUE(d.pass());
}

TEST(DecayEnvelope, UniformDataHasNoGradientTerm) {
  // grad v = 0, so the envelope is ||v^in||_1 e^{-Mt}, which bounds the
  // backward-Euler decay (1 + M dt)^{-t/dt}.
  const Grid g = Grid::line(1.0, 16);
  const Motility m = Motility::power(1.0);
  SchemeParams p;
  p.t_end = 5.0;
  p.dt_max = 1.0 / 256.0;
  const auto r = run(Field(g, 2.0), Field(g, 0.3), m, p, uniform_samples(5.0, 10));
  const DecayDiagnostic d = decay_envelope(r.samples, Field(g, 2.0), Field(g, 0.3), m, 0.0);
  ASSERT_FALSE(d.skipped);
  for (const auto& row : d.rows) {
    EXPECT_LE(row.integral, 1e-14);
    EXPECT_NEAR(row.envelope_rhs, 0.3 * std::exp(-2.0 * row.t), 1e-13);
  }
  EXPECT_FALSE(d.pass());  // BE decays slower than e^{-Mt}; zero tolerance exposes it
  EXPECT_TRUE(decay_envelope(r.samples, Field(g, 2.0), Field(g, 0.3), m, 0.05).pass());
}

TEST(ExtractLimit, StationaryGivesInitialData) {
  const Grid g = Grid::line(1.0, 64);
  const Field u = s1_u(g);
  SchemeParams p;
  p.t_end = 1.0;
  const auto r = run(u, Field(g), Motility::power(1.0), p, {});
  LimitRecord lr = extract_limit(r.final_state, u, 1e-10, 0.0);
  EXPECT_EQ(lr.u_inf, u);
  EXPECT_EQ(lr.dist_dual, 0.0);
  for (double a : lr.A_inf) EXPECT_EQ(a, 0.0);
  const Prop2Result p2 = check_prop2(lr, u, Field(g), Motility::power(1.0));
  EXPECT_EQ(p2.dist.lhs, 0.0);
  EXPECT_EQ(p2.dist.rhs, 0.0);
  EXPECT_TRUE(p2.dist.pass());
  EXPECT_TRUE(p2.smalldist_holds);
  EXPECT_TRUE(lr.certified_nonconstant);
}

TEST(ExtractLimit, UniformDataStaysUniform) {
  const Grid g = Grid::line(1.0, 16);
  const auto r = run_to_exhaustion(Field(g, 1.5), Field(g, 0.4), Motility::power(1.0), 1e-9);
  ASSERT_EQ(r.stop_reason, StopReason::v_exhausted);
  LimitRecord lr = extract_limit(r.final_state, Field(g, 1.5), 1e-10, 1e-9);
  for (double x : lr.u_inf) EXPECT_NEAR(x, 1.5, 1e-13);
  EXPECT_LE(lr.nonconst_dual, 1e-13);
  EXPECT_FALSE(check_prop2(lr, Field(g, 1.5), Field(g, 0.4), Motility::power(1.0)).smalldist_holds);
  EXPECT_FALSE(lr.certified_nonconstant);
}

TEST(ExtractLimit, RefusesUnconvergedRun) {
  const Grid g = Grid::line(1.0, 16);
  SchemeParams p;
  p.t_end = 0.1;
  const auto r = run(s1_u(g), Field(g, 0.1), Motility::power(1.0), p, {});
  EXPECT_THROW(extract_limit(r.final_state, s1_u(g), 1e-10, 1e-9), LimitNotReachedError);
}

TEST(Prop2, S1DistanceAndS2Certificate) {
  const Grid g = Grid::line(1.0, 128);
  const Field u = s1_u(g);
  const Motility m = Motility::power(1.0);
  // Continuum spread 0.25 / (2 pi^2); the discrete value sits within 1%.
  const double spread = h1_dual_norm(u - mean(u));
  EXPECT_NEAR(spread * spread, 0.25 / (2.0 * pi * pi), 0.01 * 0.012665);

  const auto r1 = run_to_exhaustion(u, Field(g, 0.1), m, 1e-9);
  LimitRecord l1 = extract_limit(r1.final_state, u, 1e-10, 1e-9);
  const Prop2Result p1 = check_prop2(l1, u, Field(g, 0.1), m);
  EXPECT_GE(p1.dist.slack, 0.0);
  EXPECT_FALSE(p1.smalldist_holds);

  const auto r2 = run_to_exhaustion(u, Field(g, 0.005), m, 5e-11);
  LimitRecord l2 = extract_limit(r2.final_state, u, 1e-10, 5e-11);
  const Prop2Result p2 = check_prop2(l2, u, Field(g, 0.005), m);
  EXPECT_TRUE(p2.smalldist_holds);
  EXPECT_TRUE(l2.certified_nonconstant);
  EXPECT_GE(l2.nonconst_dual, 0.0259 * 0.9);
  EXPECT_GE(l2.nonconst_dual, p2.lower_bound);
}

TEST(LimitProperties, MeanAndSign) {
  const Grid g = Grid::line(1.0, 64);
  const Field u = s1_u(g);
  const auto r = run_to_exhaustion(u, Field(g, 0.1), Motility::power(1.0), 1e-9);
  const LimitRecord lr = extract_limit(r.final_state, u, 1e-10, 1e-9);
  for (const auto& c : check_limit_properties(lr, u)) EXPECT_TRUE(c.pass()) << c.name;
  EXPECT_LE(lp_norm(lr.u_inf - r.final_state.u, 2.0), 1e-10);
  EXPECT_GE(check_b13(lr, u, Field(g, 0.1), Motility::power(1.0)).slack, 0.0);
}

TEST(CosineMode, TensorProductIn2D) {
  const Grid g = Grid::rectangle(2.0, 1.0, 4, 2);
  const Field f = cosine_mode(g, 1);
  const double x = 0.25, y = 0.25;
  EXPECT_NEAR(f[0], std::cos(pi * x / 2.0) * std::cos(pi * y), 1e-15);
  for (double v : cosine_mode(g, 0)) EXPECT_EQ(v, 1.0);
}

TEST(WeakForm, ModeZeroIsMassDefectAndStationaryIsZero) {
  const Grid g = Grid::line(1.0, 64);
  const Field u = s1_u(g);
  const Motility m = Motility::power(1.0);
  SchemeParams p;
  p.t_end = 0.5;
  const auto r = run(u, Field(g, 0.1), m, p, uniform_samples(0.5, 20), RunOptions{true});
  EXPECT_LE(weak_form_residual(r.samples, u, m, 0), 1e-14);
  const auto st = run(u, Field(g), m, p, uniform_samples(0.5, 5), RunOptions{true});
  EXPECT_EQ(weak_form_residual(st.samples, u, m, 1), 0.0);
}

TEST(WeakForm, SchemeRectangleRuleIsExact) {
  const Grid g = Grid::line(1.0, 64);
  const Field u = s1_u(g);
  const Motility m = Motility::power(1.0);
  SchemeParams p;
  p.t_end = 1.0;
  const auto r = run(u, Field(g, 0.1), m, p, uniform_samples(1.0, 4), RunOptions{true});
  EXPECT_LE(weak_form_residual(r.samples, u, m, 1, TimeQuadrature::scheme_rectangle), 1e-13);
  EXPECT_GT(weak_form_residual(r.samples, u, m, 1), 1e-6);
}

TEST(WeakForm, NeedsFields) {
  const Grid g = Grid::line(1.0, 8);
  SchemeParams p;
  p.t_end = 0.1;
  const auto r = run(s1_u(g), Field(g, 0.1), Motility::power(1.0), p, {});
  EXPECT_THROW(weak_form_residual(r.samples, s1_u(g), Motility::power(1.0), 1), Error);
}

TEST(VDecay, UniformCaseMatchesScalarRecursion) {
  const Grid g = Grid::line(1.0, 8);
  const double M = 2.0, c = 0.3, dt = 1.0 / 128.0;
  SchemeParams p;
  p.t_end = 4.0;
  p.dt_max = dt;
  const auto r = run(Field(g, M), Field(g, c), Motility::power(1.0), p, uniform_samples(4.0, 8));
  for (const auto& s : r.samples) {
    const double oracle = c * std::pow(1.0 + M * dt, -std::round(s.t / dt));
    EXPECT_NEAR(s.v_l1, oracle, 1e-13);
  }
  const auto cs = check_v_decay(r.samples, c, r.samples.back().v_l1);
  ASSERT_EQ(cs.size(), 3u);
  for (const auto& ch : cs) EXPECT_TRUE(ch.pass()) << ch.name;
}

TEST(VDecay, StationaryAndThresholdFailure) {
  const Grid g = Grid::line(1.0, 8);
  SchemeParams p;
  p.t_end = 1.0;
  const auto st = run(Field(g, 1.0), Field(g), Motility::power(1.0), p, uniform_samples(1.0, 2));
  for (const auto& c : check_v_decay(st.samples, 0.0, 0.0)) EXPECT_TRUE(c.pass()) << c.name;
  const auto r = run(Field(g, 1.0), Field(g, 0.5), Motility::power(1.0), p, uniform_samples(1.0, 2));
  EXPECT_FALSE(check_v_decay(r.samples, 0.5, 1e-9)[0].pass());
}

TEST(AConvergence, UniformDifferencesMatchTailSums) {
  // Uniform data: A(t) = sum_k dt gamma(v_{k+1}) u, all cells equal.
  const Grid g = Grid::line(1.0, 8);
  const double M = 1.0, c = 0.5, dt = 1.0 / 128.0;  // below the stability bound 0.9 h^2 / (2 c)
  SchemeParams p;
  p.t_end = 40.0;
  p.dt_max = dt;
  const auto r = run(Field(g, M), Field(g, c), Motility::power(1.0), p, uniform_samples(40.0, 8), RunOptions{true});
  const double q = 1.0 / (1.0 + M * dt);
  auto A_at = [&](double t) {
    const double n = std::round(t / dt);
    return M * dt * c * q * (1.0 - std::pow(q, n)) / (1.0 - q);
  };
  const double a_fin = A_at(40.0);
  for (const auto& s : r.samples) {
    const double expected = std::abs(A_at(s.t) - a_fin);
    EXPECT_NEAR(lp_norm(*s.A - *r.samples.back().A, 2.0), expected, 1e-12);
  }
  EXPECT_TRUE(check_A_convergence(r.samples).pass());
}

TEST(AConvergence, StationaryPassesAndTooFewSnapshotsThrow) {
  const Grid g = Grid::line(1.0, 8);
  SchemeParams p;
  p.t_end = 1.0;
  const auto st = run(Field(g, 1.0), Field(g), Motility::power(1.0), p, uniform_samples(1.0, 4), RunOptions{true});
  EXPECT_TRUE(check_A_convergence(st.samples).pass());
  const auto two = run(Field(g, 1.0), Field(g), Motility::power(1.0), p, {}, RunOptions{true});
  EXPECT_THROW(check_A_convergence(two.samples), Error);
}
