#include "auvnav/observability.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace auvnav;

namespace {

struct RandomGeometry {
  std::mt19937_64 rng;
  std::normal_distribution<double> n{0.0, 1.0};
  std::uniform_real_distribution<double> u{-1.0, 1.0};

  explicit RandomGeometry(std::uint64_t seed) : rng(seed) {}

  CalibrationParams calib() {
    return {Vec3(30 * u(rng), 30 * u(rng), 10 + 5 * u(rng)), {0.1 * u(rng), 0.1 * u(rng), 0.2 * u(rng)}};
  }
  Mat3 attitude() { return euler_to_rotation({0.3 * u(rng), 0.3 * u(rng), kPi * u(rng)}); }
  Vec3 position() { return Vec3(50 * u(rng), 50 * u(rng), 5 * u(rng)); }

  DoaEntry entry(const Vec3& p, const CalibrationParams& c) {
    DoaEntry e;
    e.p_vehicle = p;
    e.world_from_vehicle = attitude();
    e.m = consistent_direction(p, e.world_from_vehicle, c);
    return e;
  }

  DoaConstraintSet generic(int k) {
    DoaConstraintSet s;
    s.calib = calib();
    for (int i = 0; i < k; ++i) s.entries.push_back(entry(position(), s.calib));
    return s;
  }
};

}  // namespace

TEST(PerpendicularPair, Example) {
  const PerpendicularPair p = perpendicular_pair({1, 2, 3});
  EXPECT_EQ(p.first, Vec3(2, -1, 0));
  EXPECT_EQ(p.second, Vec3(3, 0, -1));
  EXPECT_FALSE(p.fallback);
}

TEST(PerpendicularPair, OrthogonalToDirection) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    const Vec3 m(n(rng), n(rng), n(rng));
    const PerpendicularPair p = perpendicular_pair(m);
    EXPECT_LT(std::abs(p.first.dot(m)), 1e-12);
    EXPECT_LT(std::abs(p.second.dot(m)), 1e-12);
  }
}

TEST(PerpendicularPair, FallbackWhenFirstComponentVanishes) {
  const PerpendicularPair p = perpendicular_pair({0, 0, 1});
  EXPECT_TRUE(p.fallback);
  EXPECT_NEAR(p.first.norm(), 1.0, 1e-15);
  EXPECT_NEAR(p.second.norm(), 1.0, 1e-15);
  EXPECT_LT(std::abs(p.first.dot(Vec3::UnitZ())), 1e-15);
  EXPECT_LT(std::abs(p.second.dot(Vec3::UnitZ())), 1e-15);
  EXPECT_LT(std::abs(p.first.dot(p.second)), 1e-15);
  EXPECT_THROW(perpendicular_pair(Vec3::Zero()), std::invalid_argument);
}

TEST(Observability, ConstraintsVanishAtTruth) {
  RandomGeometry g(2);
  const DoaConstraintSet s = g.generic(5);
  const Mat3 av = euler_to_rotation(s.calib.misalignment).transpose();
  for (const auto& e : s.entries)
    EXPECT_LT(doa_constraint(e, av, Vec3::Zero(), s.calib.beacon_world).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Observability, JacobianMatchesFiniteDifferences) {
  RandomGeometry g(3);
  for (int i = 0; i < 100; ++i) EXPECT_LT(verify_jacobian_fd(g.generic(3)), 1e-5);
}

TEST(Observability, FiniteDifferenceErrorShrinksWithStep) {
  RandomGeometry g(4);
  const DoaConstraintSet s = g.generic(3);
  const double coarse = verify_jacobian_fd(s, 1e-2);
  const double fine = verify_jacobian_fd(s, 1e-4);
  EXPECT_GT(coarse, 0.0);
  // Central differences: error ~ h^2 until roundoff takes over.
  EXPECT_LT(fine, coarse * 1e-2);
}

TEST(Observability, PositionRowsHavePerpendicularNorm) {
  RandomGeometry g(5);
  const DoaConstraintSet s = g.generic(4);
  const ObservabilityReport r = build_jacobian(s);
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    const PerpendicularPair p = perpendicular_pair(s.entries[i].m);
    EXPECT_NEAR(r.y.row(2 * i).tail(3).norm(), p.first.norm(), 1e-12);
    EXPECT_NEAR(r.y.row(2 * i + 1).tail(3).norm(), p.second.norm(), 1e-12);
  }
}

TEST(Observability, GenericThreeMeasurementsFullRank) {
  RandomGeometry g(6);
  for (int i = 0; i < 100; ++i) {
    const ObservabilityReport r = build_jacobian(g.generic(3));
    EXPECT_EQ(r.rank, 6);
    EXPECT_EQ(r.diagnosis, Degeneracy::Generic);
    EXPECT_GT(r.ratio, 0.0);
    EXPECT_LE(r.ratio, 1.0);
  }
}

TEST(Observability, SamePositionRankFive) {
  RandomGeometry g(7);
  for (int i = 0; i < 100; ++i) {
    DoaConstraintSet s;
    s.calib = g.calib();
    const Vec3 p = g.position();
    for (int k = 0; k < 3; ++k) s.entries.push_back(g.entry(p, s.calib));
    const ObservabilityReport r = build_jacobian(s);
    EXPECT_EQ(r.rank, 5);
    EXPECT_EQ(r.diagnosis, Degeneracy::SamePosition);
  }
}

TEST(Observability, CollinearRankFive) {
  RandomGeometry g(8);
  for (int i = 0; i < 100; ++i) {
    DoaConstraintSet s;
    s.calib = g.calib();
    const Vec3 dir = Vec3(g.n(g.rng), g.n(g.rng), g.n(g.rng)).normalized();
    for (double t : {10.0, 25.0, 60.0}) s.entries.push_back(g.entry(s.calib.beacon_world + t * dir, s.calib));
    const ObservabilityReport r = build_jacobian(s);
    EXPECT_EQ(r.rank, 5);
    EXPECT_EQ(r.diagnosis, Degeneracy::Collinear);
  }
}

TEST(Observability, RankInvariantToDirectionScale) {
  RandomGeometry g(9);
  std::uniform_real_distribution<double> lam(0.01, 100.0);
  for (int i = 0; i < 50; ++i) {
    DoaConstraintSet s = g.generic(3);
    if (i % 2) s.entries[2].p_vehicle = s.entries[0].p_vehicle, s.entries[1].p_vehicle = s.entries[0].p_vehicle;
    for (auto& e : s.entries) e.m = consistent_direction(e.p_vehicle, e.world_from_vehicle, s.calib);
    const ObservabilityReport a = build_jacobian(s);
    for (auto& e : s.entries) e.m *= lam(g.rng);
    const ObservabilityReport b = build_jacobian(s);
    EXPECT_EQ(a.rank, b.rank);
    EXPECT_EQ(a.diagnosis, b.diagnosis);
  }
}

TEST(Observability, MoreThanThreeEntriesStacks) {
  RandomGeometry g(10);
  const ObservabilityReport r = build_jacobian(g.generic(8));
  EXPECT_EQ(r.y.rows(), 16);
  EXPECT_EQ(r.rank, 6);
}

TEST(ObservabilitySweep, ZeroAngleSpreadIsDegenerate) {
  SweepConfig c;
  c.sigma_angle = {0.0, deg2rad(30.0)};
  c.sigma_radius = {2.0};
  c.samples_per_cell = 50;
  const auto cells = sweep_observability(c);
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_LT(cells[0].mean_ratio, 1e-12);
  EXPECT_GT(cells[1].mean_ratio, 1e-4);
}

TEST(ObservabilitySweep, SeedReproducibleAndCsv) {
  SweepConfig c;
  c.sigma_angle = {deg2rad(5.0), deg2rad(20.0)};
  c.sigma_radius = {0.0, 4.0};
  c.samples_per_cell = 20;
  const auto a = sweep_observability(c);
  const auto b = sweep_observability(c);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].mean_ratio, b[i].mean_ratio);
  std::ostringstream os;
  write_sweep_csv(os, a);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sigma_a_deg,sigma_r_m,mean_ratio,n_samples");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}
