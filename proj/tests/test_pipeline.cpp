#include "auvnav/experiments.hpp"
#include "auvnav/metrics.hpp"
#include "auvnav/pipeline.hpp"
#include "auvnav/sim.hpp"
#include "auvnav/usbl_aid.hpp"

#include <gtest/gtest.h>

using namespace auvnav;

namespace {

ScenarioConfig short_scenario(double duration, bool noiseless = false) {
  ScenarioConfig c;
  c.duration = duration;
  c.noiseless = noiseless;
  if (noiseless) c.dvl_scale_error = 1.0;
  return c;
}

struct Sim {
  GroundTruthLog truth;
  MeasurementStream stream;
};

Sim simulate(const ScenarioConfig& c) {
  Sim r{generate_truth(c), {}};
  r.stream = generate_measurements(r.truth, c);
  return r;
}

}  // namespace

TEST(Pipeline, EmptyStream) {
  const RunResult r = run_proposed({}, VehicleState{}, RunConfig{});
  EXPECT_TRUE(r.estimates.empty());
  EXPECT_FALSE(r.calib);
}

TEST(Pipeline, NoAcousticsEqualsDeadReckoning) {
  const Sim s = simulate(short_scenario(300.0));
  RunConfig rc;
  rc.use_acoustic = false;
  const RunResult a = run_proposed(s.stream, s.truth.states.front(), rc);
  const RunResult b = run_dr(s.stream, s.truth.states.front(), RunConfig{});
  ASSERT_EQ(a.estimates.size(), b.estimates.size());
  for (std::size_t i = 0; i < a.estimates.size(); ++i) {
    EXPECT_EQ(a.estimates[i].t, b.estimates[i].t);
    EXPECT_EQ(a.estimates[i].p_world, b.estimates[i].p_world);
  }
  EXPECT_FALSE(b.calib);
  EXPECT_FALSE(b.init.succeeded);
}

TEST(Pipeline, LogsOnSecondGrid) {
  const Sim s = simulate(short_scenario(120.0));
  const RunResult r = run_dr(s.stream, s.truth.states.front(), RunConfig{});
  ASSERT_EQ(r.estimates.size(), 121u);
  for (std::size_t i = 0; i < r.estimates.size(); ++i) EXPECT_DOUBLE_EQ(r.estimates[i].t, double(i));
}

TEST(Pipeline, NoiselessDeadReckoningStaysClose) {
  const Sim s = simulate(short_scenario(600.0, true));
  const RunResult r = run_dr(s.stream, s.truth.states.front(), RunConfig{});
  EXPECT_LT(max_position_error(r.estimates, s.truth, 0.0, 600.0), 0.1);
}

TEST(Pipeline, DeadReckoningScaleDrift) {
  // Constant velocity scale error k maps the path to k-scaled about the start point.
  ScenarioConfig c = short_scenario(600.0, true);
  c.dvl_scale_error = 1.005;
  const Sim s = simulate(c);
  const RunResult r = run_dr(s.stream, s.truth.states.front(), RunConfig{});
  const auto errs = position_errors(r.estimates, s.truth);
  const Vec3 p0 = s.truth.states.front().p_world;
  for (const auto& [t, e] : errs) {
    if (t < 60.0) continue;
    const double oracle = 0.005 * (s.truth.states[*s.truth.index_of(t)].p_world - p0).norm();
    EXPECT_NEAR(e, oracle, 0.1 + 0.1 * oracle) << t;
  }
}

TEST(Pipeline, ProposedInitializesAndCalibrates) {
  const Sim s = simulate(short_scenario(900.0, true));
  const RunResult r = run_proposed(s.stream, s.truth.states.front(), RunConfig{});
  ASSERT_TRUE(r.init.succeeded) << r.init.last_error;
  ASSERT_TRUE(r.calib);
  EXPECT_GE(r.init.n_doa, RunConfig{}.init.min_constraints);
  EXPECT_LT((r.calib->beacon_world - s.truth.calib.beacon_world).norm(), 0.5);
  EXPECT_LT(wrapped_difference(r.calib->misalignment, s.truth.calib.misalignment).norm(), deg2rad(0.5));
  EXPECT_LT(max_position_error(r.estimates, s.truth, 0.0, 900.0), 0.5);
  bool seen = false;
  for (const auto& e : r.estimates) {
    if (seen) {
      EXPECT_TRUE(e.augmented);
    }
    seen = seen || e.augmented;
  }
  EXPECT_TRUE(seen);
}

TEST(Pipeline, IgnorantKeepsMisalignmentAtZero) {
  const Sim s = simulate(short_scenario(600.0, true));
  RunConfig rc;
  rc.estimate_misalignment = false;
  const RunResult r = run_proposed(s.stream, s.truth.states.front(), rc);
  ASSERT_TRUE(r.calib);
  EXPECT_LT(r.calib->misalignment.to_vector().norm(), 1e-6);
}

TEST(Pipeline, Deterministic) {
  const ScenarioConfig c = short_scenario(400.0);
  const Sim a = simulate(c), b = simulate(c);
  const RunResult ra = run_proposed(a.stream, a.truth.states.front(), RunConfig{});
  const RunResult rb = run_proposed(b.stream, b.truth.states.front(), RunConfig{});
  ASSERT_EQ(ra.estimates.size(), rb.estimates.size());
  for (std::size_t i = 0; i < ra.estimates.size(); ++i) EXPECT_EQ(ra.estimates[i].p_world, rb.estimates[i].p_world);
}

TEST(Pipeline, GateCountsCoverAllUpdates) {
  const ScenarioConfig c = short_scenario(200.0);
  const Sim s = simulate(c);
  const RunResult r = run_dr(s.stream, s.truth.states.front(), RunConfig{});
  const auto k = static_cast<std::size_t>(MeasurementKind::Dvl);
  EXPECT_EQ(r.gates.accepted[k] + r.gates.rejected[k] + r.gates.degenerate[k], 201);
}

TEST(UsblAid, NoiselessRangesRecoverBeacon) {
  UsblAidConfig uc;
  uc.scenario.duration = 600.0;
  uc.scenario.noiseless = true;
  const UsblAidData d = generate_usbl_aid(uc);
  const BeaconFit f = localize_beacon_ranges(d.records);
  EXPECT_TRUE(f.converged);
  EXPECT_LT((f.beacon - d.calib.beacon_world).norm(), 1e-6);
}

TEST(UsblAid, NoiselessMisalignmentWithKnownBeacon) {
  UsblAidConfig uc;
  uc.scenario.duration = 1000.0;
  uc.scenario.noiseless = true;
  const UsblAidData d = generate_usbl_aid(uc);
  const InitSolution s = estimate_misalignment(d.records, d.calib.beacon_world);
  EXPECT_LT(wrapped_difference(s.gamma.misalignment, d.calib.misalignment).norm(), 1e-8);
  EXPECT_LT((s.gamma.beacon_world - d.calib.beacon_world).norm(), 1e-6);
}

TEST(UsblAid, MisalignmentErrorMatchesCovariance) {
  // 600 pings, Gaussian 1 deg DoA noise only, heading swept so every axis is excited.
  Vec3 se = Vec3::Zero();
  double nees = 0.0;
  const int trials = 10;
  for (int seed = 1; seed <= trials; ++seed) {
    UsblAidConfig uc;
    uc.scenario.duration = 3000.0;
    uc.scenario.seed = seed;
    uc.scenario.noise.t_dof = 1e12;
    uc.scenario.noise.ahrs_attitude.setZero();
    uc.scenario.trajectory.attitude_amplitudes.z() = deg2rad(90.0);
    uc.scenario.trajectory.attitude_periods.z() = 500.0;
    uc.gps_sigma = 0.0;
    const UsblAidData d = generate_usbl_aid(uc);
    ASSERT_GE(d.records.size(), 600u);
    const InitSolution s = estimate_misalignment(d.records, d.calib.beacon_world);
    const Vec3 e = wrapped_difference(s.gamma.misalignment, d.calib.misalignment);
    const Eigen::Matrix3d P = s.cov_estimate.bottomRightCorner<3, 3>();
    se += e.cwiseAbs2();
    nees += e.dot(P.ldlt().solve(e));
  }
  const Vec3 rmse = (se / trials).cwiseSqrt();
  EXPECT_LT(rmse.maxCoeff(), deg2rad(0.1)) << rmse.transpose() * 180.0 / kPi;
  EXPECT_GT(nees / (3 * trials), 0.3);
  EXPECT_LT(nees / (3 * trials), 2.0);
}

TEST(UsblAid, TooFewRecordsThrows) {
  EXPECT_THROW(localize_beacon_ranges({}), std::invalid_argument);
}

TEST(Experiments, ParallelMapKeepsOrder) {
  const auto v = parallel_map(37, [](int i) { return i * i; }, 4);
  for (int i = 0; i < 37; ++i) EXPECT_EQ(v[i], i * i);
  EXPECT_TRUE(parallel_map(0, [](int i) { return i; }).empty());
}

TEST(Experiments, TrialSeedsDistinctAndStable) {
  EXPECT_EQ(trial_seed(1, 0), trial_seed(1, 0));
  EXPECT_NE(trial_seed(1, 0), trial_seed(1, 1));
  EXPECT_NE(trial_seed(1, 0), trial_seed(2, 0));
}

TEST(Experiments, CampaignThreadCountIrrelevant) {
  ScenarioConfig c = short_scenario(150.0);
  const auto a = run_campaign(c, RunConfig{}, RunMode::DeadReckoning, 3, 9, 1);
  const auto b = run_campaign(c, RunConfig{}, RunMode::DeadReckoning, 3, 9, 3);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a.trials[i].metrics.position_rmse, b.trials[i].metrics.position_rmse);
  EXPECT_EQ(a.aggregate.n_trials, 3);
  EXPECT_THROW(run_campaign(c, RunConfig{}, RunMode::Proposed, 0, 1), ConfigError);
}

TEST(Experiments, ModeNames) {
  EXPECT_EQ(run_mode_name(RunMode::UsblAid), "usbl_aid_calibration");
  EXPECT_EQ(run_mode_name(RunMode::DeadReckoning), "dr");
}
