#pragma once

// Scenario generator: closed-form six-DoF circular trajectory with sinusoidal
// depth and attitude, sensor sampling and noise injection.

#include "auvnav/measurements.hpp"
#include "auvnav/models.hpp"
#include "auvnav/noise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace auvnav {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kDefaultPathLength = 7051.41;

struct TrajectoryConfig {
  int n_laps = 8;
  double circle_radius = kDefaultPathLength / (8 * 2.0 * kPi);
  double max_speed = 1.0;  // horizontal speed along the circle
  double center_x = 0.0;
  double center_y = 0.0;
  double depth_mean = 5.0;
  double depth_amplitude = 5.0;
  double depth_period = 300.0;
  Vec3 attitude_amplitudes{deg2rad(10.0), deg2rad(10.0), 0.0};  // roll, pitch, yaw about the path heading
  Vec3 attitude_periods{120.0, 90.0, 600.0};
};

struct SensorNoiseConfig {
  Vec3 ahrs_attitude{deg2rad(0.4), deg2rad(0.4), deg2rad(2.0)};
  double ahrs_rate = deg2rad(0.1);
  double ahrs_accel = 0.05;
  double dvl = 0.04;
  double pressure = 0.1;
  double beacon_depth = 0.1;
  double doa_tau = deg2rad(1.0);
  double doppler_tau = 0.05;
  double t_dof = 2.0;
};

struct OutageWindow {
  double start = 0.0;
  double end = 0.0;
  MeasurementKind kind = MeasurementKind::Dvl;
};

struct ScenarioConfig {
  double duration = kDefaultPathLength;
  TrajectoryConfig trajectory;
  double ahrs_rate = 20.0;
  double dvl_rate = 1.0;
  double pressure_rate = 1.0;
  double acoustic_rate = 0.2;
  SensorNoiseConfig noise;
  double dvl_scale_error = 1.005;
  Vec3 beacon_true{-50.0, 20.0, 10.0};
  double misalignment_scale = 3.0;
  EulerAngles base_misalignment{deg2rad(1.0), deg2rad(2.0), deg2rad(3.0)};
  std::vector<OutageWindow> outages;
  /// Fraction of DoA records replaced by uniform bearing/elevation draws.
  double outlier_fraction = 0.0;
  /// Records carry the nominal noise specs but no noise is drawn.
  bool noiseless = false;
  std::uint64_t seed = 1;

  /// Sample rate of the ground-truth log; every sensor rate must divide it.
  double truth_rate() const { return ahrs_rate; }

  CalibrationParams true_calib() const {
    return {beacon_true, EulerAngles::from_vector(misalignment_scale * base_misalignment.to_vector())};
  }

  void validate() const {
    if (!(duration > 0.0)) throw ConfigError("scenario: duration must be positive");
    for (double r : {ahrs_rate, dvl_rate, pressure_rate, acoustic_rate}) {
      if (!(r > 0.0)) throw ConfigError("scenario: sensor rates must be positive");
      const double ratio = truth_rate() / r;
      if (std::abs(ratio - std::round(ratio)) > 1e-9) throw ConfigError("scenario: sensor rate must divide the AHRS rate");
    }
    if (!(misalignment_scale >= 0.0)) throw ConfigError("scenario: misalignment scale must be non-negative");
    if (!(trajectory.circle_radius > 0.0) || !(trajectory.max_speed > 0.0))
      throw ConfigError("scenario: circle radius and speed must be positive");
    for (const auto& o : outages)
      if (o.start < 0.0 || o.end > duration || o.end < o.start) throw ConfigError("scenario: outage outside [0, duration]");
    if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) throw ConfigError("scenario: outlier fraction not in [0, 1]");
    if (std::abs(std::abs(trajectory.attitude_amplitudes.y()) - kPi / 2) < 0.05 ||
        std::abs(trajectory.attitude_amplitudes.y()) > kPi / 2)
      throw ConfigError("scenario: pitch amplitude too close to gimbal lock");
  }
};

/// Closed-form vehicle state at time t. Body velocity, acceleration and rate
/// are the analytic derivatives of the position and attitude functions.
inline VehicleState trajectory_state(const TrajectoryConfig& c, double t) {
  const double w = c.max_speed / c.circle_radius;
  const double ang = w * t;
  const double kz = 2.0 * kPi / c.depth_period;

  const Vec3 p(c.center_x + c.circle_radius * std::cos(ang), c.center_y + c.circle_radius * std::sin(ang),
               c.depth_mean + c.depth_amplitude * std::sin(kz * t));
  const Vec3 pd(-c.max_speed * std::sin(ang), c.max_speed * std::cos(ang), c.depth_amplitude * kz * std::cos(kz * t));
  const Vec3 pdd(-c.max_speed * w * std::cos(ang), -c.max_speed * w * std::sin(ang),
                 -c.depth_amplitude * kz * kz * std::sin(kz * t));

  Vec3 e, ed;
  for (int i = 0; i < 3; ++i) {
    const double k = 2.0 * kPi / c.attitude_periods(i);
    e(i) = c.attitude_amplitudes(i) * std::sin(k * t);
    ed(i) = c.attitude_amplitudes(i) * k * std::cos(k * t);
  }
  e(2) += ang + kPi / 2.0;
  ed(2) += w;

  VehicleState x;
  x.p_world = p;
  x.attitude = EulerAngles::from_vector(e).wrapped();
  const Mat3 r = x.world_from_body();
  x.w_body = euler_rate_matrix_inverse(x.attitude) * ed;
  x.v_body = r.transpose() * pd;
  x.a_body = r.transpose() * pdd - x.w_body.cross(x.v_body);
  return x;
}

struct GroundTruthLog {
  double rate = 20.0;
  std::vector<double> t;
  std::vector<VehicleState> states;
  CalibrationParams calib;

  std::size_t size() const { return t.size(); }
  /// Index of the sample at time `time`, if it lies on the grid.
  std::optional<std::size_t> index_of(double time) const {
    const double k = std::round(time * rate);
    if (k < 0 || k >= static_cast<double>(t.size()) || std::abs(k - time * rate) > 1e-6) return std::nullopt;
    return static_cast<std::size_t>(k);
  }
  double path_length() const {
    double s = 0.0;
    for (std::size_t i = 1; i < states.size(); ++i) s += (states[i].p_world - states[i - 1].p_world).norm();
    return s;
  }
};

inline double grid_time(std::size_t k, double rate) { return static_cast<double>(k) / rate; }

inline GroundTruthLog generate_truth(const ScenarioConfig& cfg) {
  cfg.validate();
  GroundTruthLog log;
  log.rate = cfg.truth_rate();
  log.calib = cfg.true_calib();
  const auto n = static_cast<std::size_t>(std::floor(cfg.duration * log.rate + 1e-9)) + 1;
  log.t.reserve(n);
  log.states.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    log.t.push_back(grid_time(k, log.rate));
    log.states.push_back(trajectory_state(cfg.trajectory, log.t.back()));
  }
  return log;
}

// RNG stream ids, one per channel, so that dropping one sensor does not
// change the noise drawn for another.
enum class NoiseStream : std::uint64_t { Ahrs = 1, Dvl, Pressure, BeaconDepth, Doa, Doppler, Outliers, Range, Gps };

inline Rng channel_rng(std::uint64_t seed, NoiseStream s) { return make_stream(seed, static_cast<std::uint64_t>(s)); }

struct NominalNoise {
  std::array<NoiseSpec, 3> attitude;
  NoiseSpec rate, accel, dvl, pressure, beacon_depth, doa, doppler;

  explicit NominalNoise(const SensorNoiseConfig& n)
      : attitude{NoiseSpec::gaussian(n.ahrs_attitude(0)), NoiseSpec::gaussian(n.ahrs_attitude(1)),
                 NoiseSpec::gaussian(n.ahrs_attitude(2))},
        rate(NoiseSpec::gaussian(n.ahrs_rate)),
        accel(NoiseSpec::gaussian(n.ahrs_accel)),
        dvl(NoiseSpec::gaussian(n.dvl)),
        pressure(NoiseSpec::gaussian(n.pressure)),
        beacon_depth(NoiseSpec::gaussian(n.beacon_depth)),
        doa(NoiseSpec::student_t(n.doa_tau, n.t_dof)),
        doppler(NoiseSpec::student_t(n.doppler_tau, n.t_dof)) {}
};

/// DoA of the beacon for a vehicle state, clamped into the measurement
/// ranges after noise. Returns nullopt when the bearing is undefined.
inline std::optional<DoaPrediction> true_doa(const VehicleState& x, const CalibrationParams& calib) {
  const Vec3 pa = beacon_in_array_frame(x, calib);
  if (pa.norm() < kMinDirectionNorm) return std::nullopt;
  const DoaPrediction d = predict_doa(pa);
  if (!d.bearing_defined) return std::nullopt;
  return d;
}

inline bool in_outage(const ScenarioConfig& cfg, MeasurementKind kind, double t) {
  for (const auto& o : cfg.outages)
    if (o.kind == kind && t >= o.start && t <= o.end) return true;
  return false;
}

inline MeasurementStream generate_measurements(const GroundTruthLog& truth, const ScenarioConfig& cfg) {
  cfg.validate();
  const NominalNoise nom(cfg.noise);
  const double on = cfg.noiseless ? 0.0 : 1.0;
  Rng r_ahrs = channel_rng(cfg.seed, NoiseStream::Ahrs), r_dvl = channel_rng(cfg.seed, NoiseStream::Dvl),
      r_press = channel_rng(cfg.seed, NoiseStream::Pressure), r_bd = channel_rng(cfg.seed, NoiseStream::BeaconDepth),
      r_doa = channel_rng(cfg.seed, NoiseStream::Doa), r_dop = channel_rng(cfg.seed, NoiseStream::Doppler);
  auto draw = [on](const NoiseSpec& s, Rng& r) { return on * sample_noise(s, r); };

  const auto every = [&](double rate) { return static_cast<std::size_t>(std::llround(truth.rate / rate)); };
  const std::size_t k_dvl = every(cfg.dvl_rate), k_press = every(cfg.pressure_rate),
                    k_ac = every(cfg.acoustic_rate), k_ahrs = every(cfg.ahrs_rate);

  MeasurementStream out;
  std::vector<std::size_t> doa_records;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double t = truth.t[k];
    const VehicleState& x = truth.states[k];
    if (k % k_ahrs == 0) {
      AhrsMeasurement m;
      Vec3 att = x.attitude.to_vector();
      for (int i = 0; i < 3; ++i) att(i) += draw(nom.attitude[i], r_ahrs);
      m.attitude = EulerAngles::from_vector(att).wrapped();
      for (int i = 0; i < 3; ++i) m.rate(i) = x.w_body(i) + draw(nom.rate, r_ahrs);
      for (int i = 0; i < 3; ++i) m.accel(i) = x.a_body(i) + draw(nom.accel, r_ahrs);
      m.attitude_noise = nom.attitude;
      m.rate_noise = nom.rate;
      m.accel_noise = nom.accel;
      if (!in_outage(cfg, MeasurementKind::Ahrs, t)) out.push_back({t, m});
    }
    if (k % k_dvl == 0) {
      DvlMeasurement m{cfg.dvl_scale_error * x.v_body, nom.dvl};
      for (int i = 0; i < 3; ++i) m.v_body(i) += draw(nom.dvl, r_dvl);
      if (!in_outage(cfg, MeasurementKind::Dvl, t)) out.push_back({t, m});
    }
    if (k % k_press == 0) {
      PressureMeasurement m{x.p_world.z() + draw(nom.pressure, r_press), nom.pressure};
      if (!in_outage(cfg, MeasurementKind::Pressure, t)) out.push_back({t, m});
    }
    if (k % k_ac == 0) {
      BeaconDepthMeasurement bd{truth.calib.beacon_world.z() + draw(nom.beacon_depth, r_bd), nom.beacon_depth};
      if (!in_outage(cfg, MeasurementKind::BeaconDepth, t)) out.push_back({t, bd});

      const auto d = true_doa(x, truth.calib);
      const double nb = draw(nom.doa, r_doa), ne = draw(nom.doa, r_doa);
      if (d && !in_outage(cfg, MeasurementKind::Doa, t)) {
        DoaMeasurement m{wrap_angle(d->bearing + nb), std::clamp(d->elevation + ne, -kPi / 2, kPi / 2), nom.doa,
                         nom.doa};
        doa_records.push_back(out.size());
        out.push_back({t, m});
      }
      const double ns = draw(nom.doppler, r_dop);
      const Vec3 pv = beacon_in_vehicle_frame(x, truth.calib.beacon_world);
      if (pv.norm() >= kMinDirectionNorm && !in_outage(cfg, MeasurementKind::Doppler, t)) {
        out.push_back({t, DopplerMeasurement{predict_doppler(pv, x.v_body) + ns, nom.doppler}});
      }
    }
  }

  if (cfg.outlier_fraction > 0.0 && !doa_records.empty()) {
    Rng r = channel_rng(cfg.seed, NoiseStream::Outliers);
    const auto n_out = static_cast<std::size_t>(std::llround(cfg.outlier_fraction * doa_records.size()));
    std::vector<std::size_t> chosen;
    std::sample(doa_records.begin(), doa_records.end(), std::back_inserter(chosen), n_out, r);
    std::uniform_real_distribution<double> ub(-kPi, kPi), ue(-kPi / 2, kPi / 2);
    for (std::size_t i : chosen) {
      auto& m = out[i].as<DoaMeasurement>();
      m.bearing = ub(r);
      m.elevation = ue(r);
      out[i].injected_outlier = true;
    }
  }
  sort_stream(out);
  return out;
}

inline MeasurementStream apply_bearing_offset(MeasurementStream stream, double offset) {
  for (auto& rec : stream)
    if (rec.kind() == MeasurementKind::Doa) {
      auto& m = rec.as<DoaMeasurement>();
      m.bearing = wrap_angle(m.bearing + offset);
    }
  return stream;
}

// Offline calibration data: the vehicle circles the beacon on the surface
// with slant ranges and position fixes available.

struct UsblAidConfig {
  ScenarioConfig scenario = surface_scenario(ScenarioConfig{});
  double range_sigma = 0.05;
  double gps_sigma = 0.5;  // horizontal

  /// Same sensors and motion as `base`, circling the beacon at the surface.
  static ScenarioConfig surface_scenario(ScenarioConfig base) {
    base.trajectory.center_x = base.beacon_true.x();
    base.trajectory.center_y = base.beacon_true.y();
    base.trajectory.depth_mean = 0.0;
    base.trajectory.depth_amplitude = 0.0;
    return base;
  }
};

struct UsblAidRecord {
  double t = 0.0;
  double range = 0.0;
  Vec3 gps = Vec3::Zero();
  EulerAngles attitude;  // measured by the attitude sensor
  double bearing = 0.0;
  double elevation = 0.0;
  NoiseSpec range_noise, doa_noise;
};

struct UsblAidData {
  CalibrationParams calib;
  std::vector<UsblAidRecord> records;
  std::vector<VehicleState> truth;
};

inline UsblAidData generate_usbl_aid(const UsblAidConfig& c) {
  const ScenarioConfig& cfg = c.scenario;
  cfg.validate();
  const NominalNoise nom(cfg.noise);
  const double on = cfg.noiseless ? 0.0 : 1.0;
  Rng r_range = channel_rng(cfg.seed, NoiseStream::Range), r_gps = channel_rng(cfg.seed, NoiseStream::Gps),
      r_doa = channel_rng(cfg.seed, NoiseStream::Doa), r_ahrs = channel_rng(cfg.seed, NoiseStream::Ahrs);
  const NoiseSpec range_noise = NoiseSpec::gaussian(c.range_sigma), gps_noise = NoiseSpec::gaussian(c.gps_sigma);

  UsblAidData out;
  out.calib = cfg.true_calib();
  const double period = 1.0 / cfg.acoustic_rate;
  const auto n = static_cast<std::size_t>(std::floor(cfg.duration / period + 1e-9)) + 1;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * period;
    const VehicleState x = trajectory_state(cfg.trajectory, t);
    const auto d = true_doa(x, out.calib);
    if (!d) continue;
    UsblAidRecord r;
    r.t = t;
    r.range = (out.calib.beacon_world - x.p_world).norm() + on * sample_noise(range_noise, r_range);
    r.gps = x.p_world;
    r.gps.x() += on * sample_noise(gps_noise, r_gps);
    r.gps.y() += on * sample_noise(gps_noise, r_gps);
    Vec3 att = x.attitude.to_vector();
    for (int i = 0; i < 3; ++i) att(i) += on * sample_noise(nom.attitude[i], r_ahrs);
    r.attitude = EulerAngles::from_vector(att).wrapped();
    r.bearing = wrap_angle(d->bearing + on * sample_noise(nom.doa, r_doa));
    r.elevation = std::clamp(d->elevation + on * sample_noise(nom.doa, r_doa), -kPi / 2, kPi / 2);
    r.range_noise = range_noise;
    r.doa_noise = nom.doa;
    out.records.push_back(r);
    out.truth.push_back(x);
  }
  return out;
}

}  // namespace auvnav
