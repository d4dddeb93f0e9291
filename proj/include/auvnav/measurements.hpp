#pragma once

#include "auvnav/geometry.hpp"
#include "auvnav/noise.hpp"

#include <algorithm>
#include <array>
#include <string_view>
#include <variant>
#include <vector>

namespace auvnav {

/// Attitude, angular rate and acceleration from the attitude sensor.
struct AhrsMeasurement {
  EulerAngles attitude;
  Vec3 rate = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
  std::array<NoiseSpec, 3> attitude_noise{};  // roll, pitch, yaw
  NoiseSpec rate_noise;
  NoiseSpec accel_noise;
};

struct DvlMeasurement {
  Vec3 v_body = Vec3::Zero();
  NoiseSpec noise;
};

/// Vehicle depth (world z) from the pressure sensor.
struct PressureMeasurement {
  double z_world = 0.0;
  NoiseSpec noise;
};

struct DoaMeasurement {
  double bearing = 0.0;
  double elevation = 0.0;
  NoiseSpec bearing_noise;
  NoiseSpec elevation_noise;
};

struct DopplerMeasurement {
  double speed = 0.0;
  NoiseSpec noise;
};

/// Beacon depth relayed by the beacon's own pressure sensor.
struct BeaconDepthMeasurement {
  double depth = 0.0;
  NoiseSpec noise;
};

using MeasurementPayload = std::variant<AhrsMeasurement, DvlMeasurement, PressureMeasurement,
                                        BeaconDepthMeasurement, DoaMeasurement, DopplerMeasurement>;

/// Variant index doubles as the processing order for simultaneous records.
enum class MeasurementKind { Ahrs = 0, Dvl = 1, Pressure = 2, BeaconDepth = 3, Doa = 4, Doppler = 5 };

inline constexpr std::array<std::string_view, 6> kKindNames = {"ahrs", "dvl", "pressure",
                                                               "beacon_depth", "doa", "doppler"};

struct MeasurementRecord {
  double t = 0.0;
  MeasurementPayload payload;
  /// Set by the simulator on injected outliers. Estimators never read it.
  bool injected_outlier = false;

  MeasurementKind kind() const { return static_cast<MeasurementKind>(payload.index()); }
  bool is_acoustic() const {
    const auto k = kind();
    return k == MeasurementKind::Doa || k == MeasurementKind::Doppler || k == MeasurementKind::BeaconDepth;
  }

  template <typename T>
  const T& as() const { return std::get<T>(payload); }
  template <typename T>
  T& as() { return std::get<T>(payload); }
};

using MeasurementStream = std::vector<MeasurementRecord>;

inline bool record_before(const MeasurementRecord& a, const MeasurementRecord& b) {
  if (a.t != b.t) return a.t < b.t;
  return a.payload.index() < b.payload.index();
}

inline void sort_stream(MeasurementStream& stream) {
  std::stable_sort(stream.begin(), stream.end(), record_before);
}

}  // namespace auvnav
