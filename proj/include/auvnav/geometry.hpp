#pragma once

// Frames, Euler-angle rotation algebra and angle arithmetic.
//
// World frame is NED. Euler angles are (roll, pitch, yaw) composed as
// R = Rz(yaw) * Ry(pitch) * Rx(roll), mapping body-frame vectors to the
// world frame.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace auvnav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDefaultGimbalGuard = 1e-3;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Thrown when an Euler-rate mapping is requested too close to +-90 deg pitch.
class GimbalLockError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  static EulerAngles from_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
  Vec3 to_vector() const { return {roll, pitch, yaw}; }

  /// Roll and yaw wrapped into (-pi, pi]. Pitch is left as is.
  EulerAngles wrapped() const { return {wrap_angle(roll), pitch, wrap_angle(yaw)}; }

  friend bool operator==(const EulerAngles&, const EulerAngles&) = default;
};

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return r;
}

inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return r;
}

inline Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return r;
}

/// World-from-body rotation for ZYX Euler angles.
inline Mat3 euler_to_rotation(const EulerAngles& e) {
  const double cr = std::cos(e.roll), sr = std::sin(e.roll);
  const double cp = std::cos(e.pitch), sp = std::sin(e.pitch);
  const double cy = std::cos(e.yaw), sy = std::sin(e.yaw);
  Mat3 r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp, cp * sr, cp * cr;
  return r;
}

/// Maps body angular rate to Euler-angle rates.
inline Mat3 euler_rate_matrix(const EulerAngles& e, double guard = kDefaultGimbalGuard) {
  if (std::abs(e.pitch) >= kPi / 2.0 - guard) {
    throw GimbalLockError("euler_rate_matrix: pitch within gimbal-lock guard");
  }
  const double sr = std::sin(e.roll), cr = std::cos(e.roll);
  const double cp = std::cos(e.pitch), tp = std::tan(e.pitch);
  Mat3 t;
  t << 1, sr * tp, cr * tp,
       0, cr, -sr,
       0, sr / cp, cr / cp;
  return t;
}

/// Inverse of euler_rate_matrix: Euler-angle rates to body angular rate.
inline Mat3 euler_rate_matrix_inverse(const EulerAngles& e) {
  const double sr = std::sin(e.roll), cr = std::cos(e.roll);
  const double sp = std::sin(e.pitch), cp = std::cos(e.pitch);
  Mat3 m;
  m << 1, 0, -sp,
       0, cr, sr * cp,
       0, -sr, cr * cp;
  return m;
}

/// v_x such that skew(v) * u == v.cross(u).
inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return m;
}

/// Rodrigues exponential of an axis-angle vector.
inline Mat3 rotation_exp(const Vec3& phi) {
  const double angle = phi.norm();
  const Mat3 k = skew(phi);
  if (angle < 1e-8) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  return Mat3::Identity() + (std::sin(angle) / angle) * k +
         ((1.0 - std::cos(angle)) / (angle * angle)) * k * k;
}

/// Axis-angle vector of a rotation matrix, magnitude in [0, pi].
///
/// At exactly pi the two representatives +-phi are equivalent; the one whose
/// first nonzero component is positive is returned.
inline Vec3 rotation_log(const Mat3& r) {
  Eigen::Quaterniond q(r);
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double sin_half = v.norm();
  if (sin_half < 1e-12) {
    return 2.0 * v / q.w();
  }
  const double angle = 2.0 * std::atan2(sin_half, q.w());
  Vec3 axis = v / sin_half;
  if (q.w() < 1e-15) {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis(i)) > 1e-12) {
        if (axis(i) < 0.0) axis = -axis;
        break;
      }
    }
  }
  return axis * angle;
}

}  // namespace auvnav
