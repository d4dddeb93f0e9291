#pragma once

// State-model policies for UnscentedFilter.

#include "auvnav/models.hpp"

#include <array>

namespace auvnav {

/// Vehicle state only; used for dead reckoning and for the first step of the
/// two-step estimator.
struct VehicleModel {
  static constexpr int kDim = VehicleState::kDim;
  static constexpr std::array<int, 3> kAngleIndices = {VehicleState::kAtt, VehicleState::kAtt + 1,
                                                       VehicleState::kAtt + 2};
  using State = Eigen::Matrix<double, kDim, 1>;

  State propagate(const State& x, double dt, double guard) const {
    return auvnav::propagate(VehicleState::from_vector(x), dt, guard).to_vector();
  }
  VehicleState vehicle(const State& x) const { return VehicleState::from_vector(x); }
};

/// Vehicle state augmented with beacon position and misalignment (constant).
struct AugmentedModel {
  static constexpr int kDim = AugmentedState::kDim;
  static constexpr int kBeaconIndex = 15;
  static constexpr int kMisalignmentIndex = 18;
  static constexpr std::array<int, 6> kAngleIndices = {3, 4, 5, 18, 19, 20};
  static constexpr std::array<int, 6> kConstantIndices = {15, 16, 17, 18, 19, 20};
  using State = Eigen::Matrix<double, kDim, 1>;

  State propagate(const State& x, double dt, double guard) const {
    State out = x;
    out.head<15>() = auvnav::propagate(VehicleState::from_vector(x.head<15>()), dt, guard).to_vector();
    return out;
  }
  VehicleState vehicle(const State& x) const { return VehicleState::from_vector(x.head<15>()); }
  CalibrationParams calib(const State& x) const { return CalibrationParams::from_vector(x.tail<6>()); }
};

/// Vehicle state augmented with the beacon position only; the misalignment is
/// a fixed, non-estimated value (zero for a misalignment-ignorant filter).
struct FixedMisalignmentModel {
  static constexpr int kDim = 18;
  static constexpr int kBeaconIndex = 15;
  static constexpr std::array<int, 3> kAngleIndices = {3, 4, 5};
  static constexpr std::array<int, 3> kConstantIndices = {15, 16, 17};
  using State = Eigen::Matrix<double, kDim, 1>;

  EulerAngles misalignment;

  State propagate(const State& x, double dt, double guard) const {
    State out = x;
    out.head<15>() = auvnav::propagate(VehicleState::from_vector(x.head<15>()), dt, guard).to_vector();
    return out;
  }
  VehicleState vehicle(const State& x) const { return VehicleState::from_vector(x.head<15>()); }
  CalibrationParams calib(const State& x) const { return {x.segment<3>(15), misalignment}; }
};

}  // namespace auvnav
