#include "auvnav/metrics.hpp"

#include <gtest/gtest.h>

using namespace auvnav;

namespace {

GroundTruthLog small_truth(int n) {
  GroundTruthLog g;
  g.rate = 1.0;
  g.calib = {{10.0, 0.0, 5.0}, {0.01, 0.02, 0.03}};
  for (int k = 0; k < n; ++k) {
    g.t.push_back(k);
    VehicleState x;
    x.p_world = {double(k), 0.0, 0.0};
    g.states.push_back(x);
  }
  return g;
}

EstimateSample at(double t, const Vec3& p) {
  EstimateSample e;
  e.t = t;
  e.p_world = p;
  return e;
}

}  // namespace

TEST(Metrics, ConstantOffsetRmse) {
  const auto truth = small_truth(5);
  std::vector<EstimateSample> est;
  for (int k = 0; k < 5; ++k) est.push_back(at(k, truth.states[k].p_world + Vec3(3, 4, 0)));
  const auto m = compute_metrics(est, truth);
  EXPECT_DOUBLE_EQ(m.position_rmse, 5.0);
  EXPECT_DOUBLE_EQ(m.final_position_error, 5.0);
  EXPECT_EQ(m.n_aligned, 5u);
  EXPECT_FALSE(m.beacon_error);
}

TEST(Metrics, PerfectEstimateIsZero) {
  const auto truth = small_truth(4);
  std::vector<EstimateSample> est;
  for (int k = 0; k < 4; ++k) est.push_back(at(k, truth.states[k].p_world));
  const auto m = compute_metrics(est, truth, truth.calib);
  EXPECT_EQ(m.position_rmse, 0.0);
  EXPECT_EQ(m.beacon_error->norm(), 0.0);
  EXPECT_EQ(m.alignment_error->norm(), 0.0);
}

TEST(Metrics, MixedErrors) {
  const auto truth = small_truth(3);
  std::vector<EstimateSample> est{at(0, {1, 0, 0}), at(1, {1, 0, 0}), at(2, {2, 2, 0})};
  const auto m = compute_metrics(est, truth);
  EXPECT_NEAR(m.position_rmse, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_DOUBLE_EQ(m.final_position_error, 2.0);
}

TEST(Metrics, OffGridEstimatesSkipped) {
  const auto truth = small_truth(3);
  std::vector<EstimateSample> est{at(0.5, {100, 0, 0}), at(1, {1, 0, 0})};
  const auto m = compute_metrics(est, truth);
  EXPECT_EQ(m.n_aligned, 1u);
  EXPECT_EQ(m.position_rmse, 0.0);
}

TEST(Metrics, NoCommonTimestampsThrows) {
  const auto truth = small_truth(3);
  std::vector<EstimateSample> est{at(7.0, {0, 0, 0})};
  EXPECT_THROW(compute_metrics(est, truth), AlignmentError);
  EXPECT_THROW(max_position_error(est, truth, 0, 2), AlignmentError);
}

TEST(Metrics, WrappedDifference) {
  const Vec3 d = wrapped_difference({kPi - 0.01, 0, 0}, {-kPi + 0.01, 0, 0});
  EXPECT_NEAR(d.x(), -0.02, 1e-12);
}

TEST(Metrics, MaxErrorWindow) {
  const auto truth = small_truth(5);
  std::vector<EstimateSample> est;
  for (int k = 0; k < 5; ++k) est.push_back(at(k, truth.states[k].p_world + Vec3(0, k, 0)));
  EXPECT_DOUBLE_EQ(max_position_error(est, truth, 1, 3), 3.0);
  EXPECT_DOUBLE_EQ(max_position_error(est, truth, 0, 10), 4.0);
}

TEST(Metrics, Median) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
}

TEST(Aggregate, HandComputed) {
  TrialMetrics a, b, c;
  a.n_aligned = b.n_aligned = c.n_aligned = 10;
  a.position_rmse = 1.0;
  a.final_position_error = 2.0;
  a.calib = CalibrationParams{{1, 0, 0}, {0, 0, 0}};
  a.beacon_error = Vec3(3, 4, 0);
  a.alignment_error = Vec3(0, 0, 0.1);
  b.position_rmse = 3.0;
  b.final_position_error = 6.0;
  b.calib = CalibrationParams{{3, 0, 0}, {0, 0, 0.2}};
  b.beacon_error = Vec3(0, 0, 0);
  b.alignment_error = Vec3(0, 0, 0.0);
  c.completed = false;
  c.position_rmse = 100.0;
  const auto s = aggregate({a, b, c});
  EXPECT_EQ(s.n_trials, 3);
  EXPECT_EQ(s.n_completed, 2);
  EXPECT_EQ(s.n_calibrated, 2);
  EXPECT_DOUBLE_EQ(s.mean_position_rmse, 2.0);
  EXPECT_DOUBLE_EQ(s.median_final_error, 4.0);
  EXPECT_DOUBLE_EQ(s.beacon_rmse, std::sqrt(25.0 / 2.0));
  EXPECT_DOUBLE_EQ(s.alignment_rmse, std::sqrt(0.01 / 2.0));
  EXPECT_DOUBLE_EQ(s.beacon_mean.x(), 2.0);
  EXPECT_DOUBLE_EQ(s.misalignment_mean.z(), 0.1);
  EXPECT_EQ(s.n_navigated, 2);
}

TEST(Aggregate, CalibrationOnlyTrialsSkipPositionStats) {
  TrialMetrics a;
  a.calib = CalibrationParams{};
  a.beacon_error = Vec3(1, 0, 0);
  a.alignment_error = Vec3::Zero();
  const auto s = aggregate({a});
  EXPECT_EQ(s.n_navigated, 0);
  EXPECT_EQ(s.n_calibrated, 1);
  EXPECT_TRUE(std::isnan(s.median_final_error));
}

TEST(Aggregate, RmseIsScaleEquivariant) {
  std::vector<TrialMetrics> v(4);
  for (int i = 0; i < 4; ++i) {
    v[i].calib = CalibrationParams{};
    v[i].beacon_error = Vec3(i, -i, 2 * i);
    v[i].alignment_error = Vec3::Zero();
  }
  const double r = aggregate(v).beacon_rmse;
  for (auto& t : v) *t.beacon_error *= 3.0;
  EXPECT_NEAR(aggregate(v).beacon_rmse, 3.0 * r, 1e-12);
}
