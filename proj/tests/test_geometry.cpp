#include "auvnav/geometry.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace auvnav;

namespace {

// Single-axis rotations written out independently of the library.
Mat3 about_x(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
Mat3 about_y(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
Mat3 about_z(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

Mat3 rodrigues(const Vec3& phi) {
  const double angle = phi.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, phi / angle).toRotationMatrix();
}

}  // namespace

TEST(EulerToRotation, IdentityAtZero) {
  EXPECT_TRUE(euler_to_rotation({0, 0, 0}).isApprox(Mat3::Identity(), 0.0));
}

TEST(EulerToRotation, PureYawRotatesNorthToEast) {
  const Vec3 world = euler_to_rotation({0, 0, kPi / 2}) * Vec3(1, 0, 0);
  EXPECT_NEAR(world.x(), 0.0, 1e-15);
  EXPECT_NEAR(world.y(), 1.0, 1e-15);
  EXPECT_NEAR(world.z(), 0.0, 1e-15);
}

TEST(EulerToRotation, MatchesExplicitZyxProduct) {
  const EulerAngles e{0.1, 0.2, 0.3};
  const Mat3 r = euler_to_rotation(e);
  const Mat3 oracle = about_z(0.3) * about_y(0.2) * about_x(0.1);
  EXPECT_LT((r - oracle).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
}

TEST(EulerToRotation, OrthonormalForRandomAngles) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ang(-kPi, kPi), pitch(-kPi / 2, kPi / 2);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 r = euler_to_rotation({ang(rng), pitch(rng), ang(rng)});
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
  }
}

TEST(EulerRateMatrix, IdentityAtZeroRollPitch) {
  EXPECT_EQ(euler_rate_matrix({0, 0, 0}), Mat3::Identity());
  EXPECT_EQ(euler_rate_matrix({0, 0, 2.1}), Mat3::Identity());
}

TEST(EulerRateMatrix, QuarterPiRoll) {
  const double h = std::sqrt(2.0) / 2.0;
  Mat3 expected;
  expected << 1, 0, 0, 0, h, -h, 0, h, h;
  EXPECT_LT((euler_rate_matrix({kPi / 4, 0, 0}) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EulerRateMatrix, GimbalLockThrows) {
  EXPECT_THROW(euler_rate_matrix({0, kPi / 2, 0}), GimbalLockError);
  EXPECT_THROW(euler_rate_matrix({0, -kPi / 2 + 5e-4, 0}), GimbalLockError);
  EXPECT_NO_THROW(euler_rate_matrix({0, kPi / 2 - 2e-3, 0}));
  EXPECT_NO_THROW(euler_rate_matrix({0, kPi / 2 - 2e-3, 0}, 1e-3));
  EXPECT_THROW(euler_rate_matrix({0, kPi / 2 - 2e-3, 0}, 1e-2), GimbalLockError);
}

TEST(EulerRateMatrix, InverseIsInverse) {
  const EulerAngles e{0.4, -0.7, 1.2};
  EXPECT_LT((euler_rate_matrix(e) * euler_rate_matrix_inverse(e) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WrapAngle, Examples) {
  EXPECT_EQ(wrap_angle(0.0), 0.0);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
  EXPECT_EQ(wrap_angle(-kPi), kPi);
  EXPECT_EQ(wrap_angle(kPi), kPi);
}

TEST(WrapAngle, IdempotentAndCongruent) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> a(-100.0, 100.0);
  for (int i = 0; i < 10000; ++i) {
    const double x = a(rng);
    const double w = wrap_angle(x);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    EXPECT_EQ(wrap_angle(w), w);
    const double k = (x - w) / (2 * kPi);
    EXPECT_NEAR(k, std::round(k), 1e-12);
  }
}

TEST(Skew, Examples) {
  EXPECT_EQ(skew(Vec3::Zero()), Mat3::Zero());
  Mat3 expected;
  expected << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  EXPECT_EQ(skew({1, 2, 3}), expected);
  const Vec3 v{0.3, -1.1, 2.0};
  EXPECT_EQ(skew(v) * v, Vec3::Zero());
}

TEST(Skew, AntisymmetricAndCross) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    const Vec3 v{n(rng), n(rng), n(rng)}, u{n(rng), n(rng), n(rng)};
    EXPECT_EQ(skew(v).transpose(), -skew(v));
    EXPECT_LT((skew(v) * u - v.cross(u)).norm(), 1e-14);
  }
}

TEST(RotationLog, Examples) {
  EXPECT_EQ(rotation_log(Mat3::Identity()), Vec3::Zero());
  const Vec3 phi = rotation_log(about_z(kPi / 2));
  EXPECT_LT((phi - Vec3(0, 0, kPi / 2)).norm(), 1e-15);
}

TEST(RotationLog, RoundTripsAgainstRodrigues) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> angle(0.0, kPi - 1e-3);
  for (int i = 0; i < 100; ++i) {
    const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
    const Mat3 r = rodrigues(axis * angle(rng));
    const Vec3 phi = rotation_log(r);
    EXPECT_LE(phi.norm(), kPi);
    EXPECT_LT((rodrigues(phi) - r).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((rotation_exp(phi) - r).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RotationLog, AngleNearPi) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  for (double gap : {1e-3, 1e-6, 1e-9, 0.0}) {
    const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
    const Mat3 r = rodrigues(axis * (kPi - gap));
    const Vec3 phi = rotation_log(r);
    EXPECT_NEAR(phi.norm(), kPi - gap, 1e-9);
    EXPECT_LT((rodrigues(phi) - r).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RotationLog, SignRuleAtPi) {
  const Vec3 phi = rotation_log(about_y(kPi));
  EXPECT_NEAR(phi.y(), kPi, 1e-12);
  const Vec3 phi2 = rotation_log(rodrigues(Vec3(0, -1, 1).normalized() * kPi));
  EXPECT_GT(phi2.y(), 0.0);
  EXPECT_NEAR(phi2.norm(), kPi, 1e-12);
}
