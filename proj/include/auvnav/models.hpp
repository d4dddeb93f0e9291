#pragma once

// Process model and measurement models shared by the simulator, the filter
// and the initializer.

#include "auvnav/geometry.hpp"
#include "auvnav/noise.hpp"

#include <stdexcept>

namespace auvnav {

using Vector15 = Eigen::Matrix<double, 15, 1>;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Vector21 = Eigen::Matrix<double, 21, 1>;

/// Beacon coincides with the vehicle/array origin, so no direction exists.
class DegenerateGeometryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Dead-reckonable vehicle state, flattened as [p, r, v, a, w].
struct VehicleState {
  Vec3 p_world = Vec3::Zero();
  EulerAngles attitude;
  Vec3 v_body = Vec3::Zero();
  Vec3 a_body = Vec3::Zero();
  Vec3 w_body = Vec3::Zero();

  static constexpr int kDim = 15;
  static constexpr int kPos = 0;
  static constexpr int kAtt = 3;
  static constexpr int kVel = 6;
  static constexpr int kAcc = 9;
  static constexpr int kRate = 12;

  Vector15 to_vector() const {
    Vector15 x;
    x << p_world, attitude.to_vector(), v_body, a_body, w_body;
    return x;
  }

  template <typename Derived>
  static VehicleState from_vector(const Eigen::MatrixBase<Derived>& x) {
    VehicleState s;
    s.p_world = x.template segment<3>(kPos);
    s.attitude = EulerAngles::from_vector(x.template segment<3>(kAtt));
    s.v_body = x.template segment<3>(kVel);
    s.a_body = x.template segment<3>(kAcc);
    s.w_body = x.template segment<3>(kRate);
    return s;
  }

  Mat3 world_from_body() const { return euler_to_rotation(attitude); }
};

/// Constant parameters: beacon world position and array misalignment.
struct CalibrationParams {
  Vec3 beacon_world = Vec3::Zero();
  EulerAngles misalignment;

  static constexpr int kDim = 6;

  Vector6 to_vector() const {
    Vector6 g;
    g << beacon_world, misalignment.to_vector();
    return g;
  }

  template <typename Derived>
  static CalibrationParams from_vector(const Eigen::MatrixBase<Derived>& g) {
    return {g.template segment<3>(0), EulerAngles::from_vector(g.template segment<3>(3))};
  }
};

struct AugmentedState {
  VehicleState vehicle;
  CalibrationParams calib;

  static constexpr int kDim = 21;

  Vector21 to_vector() const {
    Vector21 x;
    x << vehicle.to_vector(), calib.to_vector();
    return x;
  }

  template <typename Derived>
  static AugmentedState from_vector(const Eigen::MatrixBase<Derived>& x) {
    return {VehicleState::from_vector(x.template segment<15>(0)),
            CalibrationParams::from_vector(x.template segment<6>(15))};
  }
};

/// One step of the discrete kinematic model: position integrates the rotated
/// body velocity and acceleration, attitude integrates the Euler rates, body
/// velocity integrates the body acceleration; acceleration and rate are held.
inline VehicleState propagate(const VehicleState& x, double dt, double gimbal_guard = kDefaultGimbalGuard) {
  const Mat3 r = x.world_from_body();
  const Mat3 t = euler_rate_matrix(x.attitude, gimbal_guard);
  VehicleState out = x;
  out.p_world = x.p_world + r * x.v_body * dt + 0.5 * r * x.a_body * dt * dt;
  out.attitude = EulerAngles::from_vector(x.attitude.to_vector() + t * x.w_body * dt).wrapped();
  out.v_body = x.v_body + x.a_body * dt;
  return out;
}

/// Beacon expressed in the vehicle (AHRS) frame.
inline Vec3 beacon_in_vehicle_frame(const VehicleState& x, const Vec3& beacon_world) {
  return x.world_from_body().transpose() * (beacon_world - x.p_world);
}

/// Beacon expressed in the acoustic array frame; the array frame is rotated
/// from the vehicle frame by R(misalignment).
inline Vec3 beacon_in_array_frame(const VehicleState& x, const CalibrationParams& calib) {
  return euler_to_rotation(calib.misalignment).transpose() *
         beacon_in_vehicle_frame(x, calib.beacon_world);
}

struct DoaPrediction {
  double bearing = 0.0;
  double elevation = 0.0;
  /// False when the beacon lies on the array z-axis and atan2(0, 0) would be
  /// meaningless. `bearing` is then 0 and must not be used.
  bool bearing_defined = true;
};

inline constexpr double kMinDirectionNorm = 1e-9;

/// Bearing/elevation of a direction expressed in the array frame.
inline DoaPrediction predict_doa(const Vec3& p_array) {
  const double range = p_array.norm();
  if (range < kMinDirectionNorm) {
    throw DegenerateGeometryError("predict_doa: beacon at array origin");
  }
  DoaPrediction out;
  const double horizontal = std::hypot(p_array.x(), p_array.y());
  out.bearing_defined = horizontal > 1e-12 * range;
  out.bearing = out.bearing_defined ? std::atan2(p_array.y(), p_array.x()) : 0.0;
  if (out.bearing <= -kPi) out.bearing = kPi;
  out.elevation = std::asin(std::clamp(p_array.z() / range, -1.0, 1.0));
  return out;
}

/// Velocity component along the line of sight to the beacon; positive when
/// closing.
inline double predict_doppler(const Vec3& p_vehicle_frame, const Vec3& v_body) {
  const double range = p_vehicle_frame.norm();
  if (range < kMinDirectionNorm) {
    throw DegenerateGeometryError("predict_doppler: beacon coincides with vehicle");
  }
  return p_vehicle_frame.dot(v_body) / range;
}

inline double predict_doppler(const VehicleState& x, const Vec3& beacon_world) {
  return predict_doppler(beacon_in_vehicle_frame(x, beacon_world), x.v_body);
}

inline double predict_beacon_depth(const CalibrationParams& calib) { return calib.beacon_world.z(); }

}  // namespace auvnav
