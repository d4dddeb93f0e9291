#pragma once

// Config files (JSON), measurement streams (one JSON object per line),
// ground truth and estimates (CSV). Each format carries a schema tag on
// its first line.

#include "auvnav/experiments.hpp"
#include "auvnav/metrics.hpp"
#include "auvnav/pipeline.hpp"
#include "auvnav/sim.hpp"

#include <json.hpp>

#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace auvnav {

using json = nlohmann::json;

inline constexpr const char* kConfigSchema = "auvnav-config/1";
inline constexpr const char* kStreamSchema = "auvnav-stream/1";
inline constexpr const char* kTruthSchema = "auvnav-truth/1";
inline constexpr const char* kEstimateSchema = "auvnav-estimates/1";

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
inline json vec_deg(const Vec3& v) { return vec(v * (180.0 / kPi)); }
inline Vec3 to_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
inline Vec3 to_vec_rad(const json& j) { return to_vec(j) * (kPi / 180.0); }

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}
inline void read_vec(const json& j, const char* key, Vec3& dst) {
  if (j.contains(key)) dst = to_vec(j.at(key));
}
inline void read_vec_deg(const json& j, const char* key, Vec3& dst) {
  if (j.contains(key)) dst = to_vec_rad(j.at(key));
}
inline void read_deg(const json& j, const char* key, double& dst) {
  if (j.contains(key)) dst = deg2rad(j.at(key).get<double>());
}

inline MeasurementKind kind_from_name(const std::string& s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == s) return static_cast<MeasurementKind>(i);
  throw FormatError("unknown measurement kind: " + s);
}

}  // namespace detail

inline json noise_to_json(const NoiseSpec& n) {
  json j{{"family", n.family == NoiseFamily::Gaussian ? "gaussian" : "t"}, {"location", n.location}, {"scale", n.scale}};
  if (n.family == NoiseFamily::LocationScaleT) j["dof"] = n.dof;
  return j;
}

inline NoiseSpec noise_from_json(const json& j) {
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "gaussian") return NoiseSpec::gaussian(j.at("scale").get<double>(), j.value("location", 0.0));
  if (fam == "t") return NoiseSpec::student_t(j.at("scale").get<double>(), j.value("dof", 2.0), j.value("location", 0.0));
  throw FormatError("unknown noise family: " + fam);
}

// Angles in config files are in degrees.

inline json scenario_to_json(const ScenarioConfig& c) {
  const auto& t = c.trajectory;
  const auto& n = c.noise;
  json outages = json::array();
  for (const auto& o : c.outages)
    outages.push_back({{"start", o.start}, {"end", o.end}, {"kind", std::string(kKindNames[static_cast<int>(o.kind)])}});
  return {
      {"duration", c.duration},
      {"trajectory",
       {{"n_laps", t.n_laps},
        {"circle_radius", t.circle_radius},
        {"max_speed", t.max_speed},
        {"center", json::array({t.center_x, t.center_y})},
        {"depth_mean", t.depth_mean},
        {"depth_amplitude", t.depth_amplitude},
        {"depth_period", t.depth_period},
        {"attitude_amplitudes_deg", detail::vec_deg(t.attitude_amplitudes)},
        {"attitude_periods", detail::vec(t.attitude_periods)}}},
      {"rates", {{"ahrs", c.ahrs_rate}, {"dvl", c.dvl_rate}, {"pressure", c.pressure_rate}, {"acoustic", c.acoustic_rate}}},
      {"noise",
       {{"ahrs_attitude_deg", detail::vec_deg(n.ahrs_attitude)},
        {"ahrs_rate_deg", rad2deg(n.ahrs_rate)},
        {"ahrs_accel", n.ahrs_accel},
        {"dvl", n.dvl},
        {"pressure", n.pressure},
        {"beacon_depth", n.beacon_depth},
        {"doa_tau_deg", rad2deg(n.doa_tau)},
        {"doppler_tau", n.doppler_tau},
        {"t_dof", n.t_dof}}},
      {"dvl_scale_error", c.dvl_scale_error},
      {"beacon_true", detail::vec(c.beacon_true)},
      {"misalignment_scale", c.misalignment_scale},
      {"base_misalignment_deg", detail::vec_deg(c.base_misalignment.to_vector())},
      {"outages", outages},
      {"outlier_fraction", c.outlier_fraction},
      {"noiseless", c.noiseless},
      {"seed", c.seed},
  };
}

inline ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig c;
  detail::read_opt(j, "duration", c.duration);
  if (j.contains("trajectory")) {
    const json& t = j.at("trajectory");
    auto& d = c.trajectory;
    detail::read_opt(t, "n_laps", d.n_laps);
    detail::read_opt(t, "circle_radius", d.circle_radius);
    detail::read_opt(t, "max_speed", d.max_speed);
    if (t.contains("center")) {
      d.center_x = t.at("center").at(0).get<double>();
      d.center_y = t.at("center").at(1).get<double>();
    }
    detail::read_opt(t, "depth_mean", d.depth_mean);
    detail::read_opt(t, "depth_amplitude", d.depth_amplitude);
    detail::read_opt(t, "depth_period", d.depth_period);
    detail::read_vec_deg(t, "attitude_amplitudes_deg", d.attitude_amplitudes);
    detail::read_vec(t, "attitude_periods", d.attitude_periods);
  }
  if (j.contains("rates")) {
    const json& r = j.at("rates");
    detail::read_opt(r, "ahrs", c.ahrs_rate);
    detail::read_opt(r, "dvl", c.dvl_rate);
    detail::read_opt(r, "pressure", c.pressure_rate);
    detail::read_opt(r, "acoustic", c.acoustic_rate);
  }
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    auto& d = c.noise;
    detail::read_vec_deg(n, "ahrs_attitude_deg", d.ahrs_attitude);
    detail::read_deg(n, "ahrs_rate_deg", d.ahrs_rate);
    detail::read_opt(n, "ahrs_accel", d.ahrs_accel);
    detail::read_opt(n, "dvl", d.dvl);
    detail::read_opt(n, "pressure", d.pressure);
    detail::read_opt(n, "beacon_depth", d.beacon_depth);
    detail::read_deg(n, "doa_tau_deg", d.doa_tau);
    detail::read_opt(n, "doppler_tau", d.doppler_tau);
    detail::read_opt(n, "t_dof", d.t_dof);
  }
  detail::read_opt(j, "dvl_scale_error", c.dvl_scale_error);
  detail::read_vec(j, "beacon_true", c.beacon_true);
  detail::read_opt(j, "misalignment_scale", c.misalignment_scale);
  if (j.contains("base_misalignment_deg"))
    c.base_misalignment = EulerAngles::from_vector(detail::to_vec_rad(j.at("base_misalignment_deg")));
  if (j.contains("outages")) {
    c.outages.clear();
    for (const auto& o : j.at("outages"))
      c.outages.push_back({o.at("start").get<double>(), o.at("end").get<double>(),
                           detail::kind_from_name(o.value("kind", std::string("dvl")))});
  }
  detail::read_opt(j, "outlier_fraction", c.outlier_fraction);
  detail::read_opt(j, "noiseless", c.noiseless);
  detail::read_opt(j, "seed", c.seed);
  c.validate();
  return c;
}

inline json run_to_json(const RunConfig& c) {
  const auto& f = c.filter;
  const auto& i = c.init;
  return {
      {"filter",
       {{"alpha", f.alpha},
        {"beta", f.beta},
        {"kappa", f.kappa},
        {"gate_multiplier", f.gate_multiplier},
        {"q_velocity", f.q_velocity},
        {"q_accel", f.q_accel},
        {"q_rate", f.q_rate},
        {"init_position_sigma", f.init_position_sigma},
        {"init_attitude_sigma_deg", detail::vec_deg(f.init_attitude_sigma)},
        {"init_velocity_sigma", f.init_velocity_sigma},
        {"init_accel_sigma", f.init_accel_sigma},
        {"init_rate_sigma_deg", rad2deg(f.init_rate_sigma)},
        {"log_period", f.log_period}}},
      {"init",
       {{"min_constraints", i.min_constraints},
        {"min_observability_ratio", i.min_observability_ratio},
        {"seed_range", i.prior.seed_range},
        {"beacon_sigma", i.prior.beacon_sigma},
        {"misalignment_sigma_deg", rad2deg(i.prior.misalignment_sigma)},
        {"ransac_iterations", i.ransac.iterations},
        {"inlier_threshold", i.ransac.inlier_threshold},
        {"refine_rounds", i.ransac.refine_rounds},
        {"ransac_seed", i.ransac.seed},
        {"lm_initial_damping", i.ransac.nls.initial_damping},
        {"lm_max_iterations", i.ransac.nls.max_iterations},
        {"cov_inflation", i.cov_inflation},
        {"retry_every", i.retry_every}}},
      {"use_acoustic", c.use_acoustic},
      {"estimate_misalignment", c.estimate_misalignment},
  };
}

inline RunConfig run_from_json(const json& j) {
  RunConfig c;
  if (j.contains("filter")) {
    const json& f = j.at("filter");
    auto& d = c.filter;
    detail::read_opt(f, "alpha", d.alpha);
    detail::read_opt(f, "beta", d.beta);
    detail::read_opt(f, "kappa", d.kappa);
    detail::read_opt(f, "gate_multiplier", d.gate_multiplier);
    detail::read_opt(f, "q_velocity", d.q_velocity);
    detail::read_opt(f, "q_accel", d.q_accel);
    detail::read_opt(f, "q_rate", d.q_rate);
    detail::read_opt(f, "init_position_sigma", d.init_position_sigma);
    detail::read_vec_deg(f, "init_attitude_sigma_deg", d.init_attitude_sigma);
    detail::read_opt(f, "init_velocity_sigma", d.init_velocity_sigma);
    detail::read_opt(f, "init_accel_sigma", d.init_accel_sigma);
    detail::read_deg(f, "init_rate_sigma_deg", d.init_rate_sigma);
    detail::read_opt(f, "log_period", d.log_period);
    if (!(d.alpha > 0.0 && d.alpha <= 1.0)) throw ConfigError("filter: alpha must be in (0, 1]");
  }
  if (j.contains("init")) {
    const json& i = j.at("init");
    auto& d = c.init;
    detail::read_opt(i, "min_constraints", d.min_constraints);
    detail::read_opt(i, "min_observability_ratio", d.min_observability_ratio);
    detail::read_opt(i, "seed_range", d.prior.seed_range);
    detail::read_opt(i, "beacon_sigma", d.prior.beacon_sigma);
    detail::read_deg(i, "misalignment_sigma_deg", d.prior.misalignment_sigma);
    detail::read_opt(i, "ransac_iterations", d.ransac.iterations);
    detail::read_opt(i, "inlier_threshold", d.ransac.inlier_threshold);
    detail::read_opt(i, "refine_rounds", d.ransac.refine_rounds);
    detail::read_opt(i, "ransac_seed", d.ransac.seed);
    detail::read_opt(i, "lm_initial_damping", d.ransac.nls.initial_damping);
    detail::read_opt(i, "lm_max_iterations", d.ransac.nls.max_iterations);
    detail::read_opt(i, "cov_inflation", d.cov_inflation);
    detail::read_opt(i, "retry_every", d.retry_every);
    d.ransac.seed_range = d.prior.seed_range;
    if (d.min_constraints < 3) throw ConfigError("init: min_constraints must be at least 3");
  }
  detail::read_opt(j, "use_acoustic", c.use_acoustic);
  detail::read_opt(j, "estimate_misalignment", c.estimate_misalignment);
  return c;
}

/// Top-level config file: {"schema", "scenario", "run", "mode", "trials", "seed"}.
struct ConfigFile {
  ScenarioConfig scenario;
  RunConfig run;
  RunMode mode = RunMode::Proposed;
  int trials = 1;
  std::uint64_t seed = 1;
};

inline RunMode run_mode_from_name(const std::string& s) {
  for (RunMode m : {RunMode::Proposed, RunMode::DeadReckoning, RunMode::MisalignmentIgnorant, RunMode::UsblAid})
    if (run_mode_name(m) == s) return m;
  throw ConfigError("unknown mode: " + s);
}

inline json config_to_json(const ConfigFile& c) {
  return {{"schema", kConfigSchema},
          {"mode", std::string(run_mode_name(c.mode))},
          {"trials", c.trials},
          {"seed", c.seed},
          {"scenario", scenario_to_json(c.scenario)},
          {"run", run_to_json(c.run)}};
}

inline ConfigFile config_from_json(const json& j) {
  if (j.value("schema", std::string()) != kConfigSchema)
    throw FormatError(std::string("config: expected schema ") + kConfigSchema);
  ConfigFile c;
  if (j.contains("scenario")) c.scenario = scenario_from_json(j.at("scenario"));
  if (j.contains("run")) c.run = run_from_json(j.at("run"));
  if (j.contains("mode")) c.mode = run_mode_from_name(j.at("mode").get<std::string>());
  detail::read_opt(j, "trials", c.trials);
  detail::read_opt(j, "seed", c.seed);
  if (c.trials < 1) throw ConfigError("config: trials must be at least 1");
  return c;
}

// Measurement streams.

inline json record_to_json(const MeasurementRecord& r) {
  json j{{"t", r.t}, {"kind", std::string(kKindNames[r.payload.index()])}};
  if (r.injected_outlier) j["outlier"] = true;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, AhrsMeasurement>) {
          j["attitude"] = detail::vec(m.attitude.to_vector());
          j["rate"] = detail::vec(m.rate);
          j["accel"] = detail::vec(m.accel);
          j["attitude_noise"] = json::array({noise_to_json(m.attitude_noise[0]), noise_to_json(m.attitude_noise[1]),
                                             noise_to_json(m.attitude_noise[2])});
          j["rate_noise"] = noise_to_json(m.rate_noise);
          j["accel_noise"] = noise_to_json(m.accel_noise);
        } else if constexpr (std::is_same_v<T, DvlMeasurement>) {
          j["v_body"] = detail::vec(m.v_body);
          j["noise"] = noise_to_json(m.noise);
        } else if constexpr (std::is_same_v<T, PressureMeasurement>) {
          j["z_world"] = m.z_world;
          j["noise"] = noise_to_json(m.noise);
        } else if constexpr (std::is_same_v<T, BeaconDepthMeasurement>) {
          j["depth"] = m.depth;
          j["noise"] = noise_to_json(m.noise);
        } else if constexpr (std::is_same_v<T, DoaMeasurement>) {
          j["bearing"] = m.bearing;
          j["elevation"] = m.elevation;
          j["bearing_noise"] = noise_to_json(m.bearing_noise);
          j["elevation_noise"] = noise_to_json(m.elevation_noise);
        } else {
          j["speed"] = m.speed;
          j["noise"] = noise_to_json(m.noise);
        }
      },
      r.payload);
  return j;
}

inline MeasurementRecord record_from_json(const json& j) {
  MeasurementRecord r;
  r.t = j.at("t").get<double>();
  r.injected_outlier = j.value("outlier", false);
  switch (detail::kind_from_name(j.at("kind").get<std::string>())) {
    case MeasurementKind::Ahrs: {
      AhrsMeasurement m;
      m.attitude = EulerAngles::from_vector(detail::to_vec(j.at("attitude")));
      m.rate = detail::to_vec(j.at("rate"));
      m.accel = detail::to_vec(j.at("accel"));
      for (int i = 0; i < 3; ++i) m.attitude_noise[i] = noise_from_json(j.at("attitude_noise").at(i));
      m.rate_noise = noise_from_json(j.at("rate_noise"));
      m.accel_noise = noise_from_json(j.at("accel_noise"));
      r.payload = m;
      break;
    }
    case MeasurementKind::Dvl:
      r.payload = DvlMeasurement{detail::to_vec(j.at("v_body")), noise_from_json(j.at("noise"))};
      break;
    case MeasurementKind::Pressure:
      r.payload = PressureMeasurement{j.at("z_world").get<double>(), noise_from_json(j.at("noise"))};
      break;
    case MeasurementKind::BeaconDepth:
      r.payload = BeaconDepthMeasurement{j.at("depth").get<double>(), noise_from_json(j.at("noise"))};
      break;
    case MeasurementKind::Doa:
      r.payload = DoaMeasurement{j.at("bearing").get<double>(), j.at("elevation").get<double>(),
                                 noise_from_json(j.at("bearing_noise")), noise_from_json(j.at("elevation_noise"))};
      break;
    case MeasurementKind::Doppler:
      r.payload = DopplerMeasurement{j.at("speed").get<double>(), noise_from_json(j.at("noise"))};
      break;
  }
  return r;
}

inline void write_stream(std::ostream& os, const MeasurementStream& s) {
  os << json{{"schema", kStreamSchema}}.dump() << '\n';
  for (const auto& r : s) os << record_to_json(r).dump() << '\n';
}

inline MeasurementStream read_stream(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || json::parse(line).value("schema", std::string()) != kStreamSchema)
    throw FormatError(std::string("stream: expected schema ") + kStreamSchema);
  MeasurementStream s;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    s.push_back(record_from_json(json::parse(line)));
  }
  for (std::size_t i = 1; i < s.size(); ++i)
    if (record_before(s[i], s[i - 1])) throw FormatError("stream: records not time-ordered");
  return s;
}

// Ground truth and estimates as CSV. Metadata lines start with '#'.

inline void write_truth(std::ostream& os, const GroundTruthLog& truth, const ScenarioConfig& cfg) {
  os << "# " << kTruthSchema << '\n';
  os << "# seed " << cfg.seed << '\n';
  os << "# rate " << truth.rate << '\n';
  const Vec3 b = truth.calib.beacon_world, m = truth.calib.misalignment.to_vector();
  os << std::setprecision(17);
  os << "# beacon " << b.x() << ' ' << b.y() << ' ' << b.z() << '\n';
  os << "# misalignment " << m.x() << ' ' << m.y() << ' ' << m.z() << '\n';
  os << "# config " << scenario_to_json(cfg).dump() << '\n';
  os << "t,px,py,pz,roll,pitch,yaw,vx,vy,vz,ax,ay,az,wx,wy,wz\n";
  for (std::size_t k = 0; k < truth.size(); ++k) {
    os << truth.t[k];
    const Vector15 x = truth.states[k].to_vector();
    for (int i = 0; i < 15; ++i) os << ',' << x(i);
    os << '\n';
  }
}

inline GroundTruthLog read_truth(std::istream& is) {
  GroundTruthLog truth;
  std::string line;
  if (!std::getline(is, line) || line != std::string("# ") + kTruthSchema)
    throw FormatError(std::string("truth: expected schema ") + kTruthSchema);
  Vec3 b = Vec3::Zero(), m = Vec3::Zero();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(2));
      std::string key;
      ls >> key;
      if (key == "rate") ls >> truth.rate;
      else if (key == "beacon") ls >> b.x() >> b.y() >> b.z();
      else if (key == "misalignment") ls >> m.x() >> m.y() >> m.z();
      continue;
    }
    if (line[0] == 't') continue;
    std::istringstream ls(line);
    std::string cell;
    std::array<double, 16> v{};
    for (auto& x : v) {
      if (!std::getline(ls, cell, ',')) throw FormatError("truth: short row");
      x = std::stod(cell);
    }
    truth.t.push_back(v[0]);
    truth.states.push_back(VehicleState::from_vector(Eigen::Map<const Vector15>(v.data() + 1)));
  }
  truth.calib = {b, EulerAngles::from_vector(m)};
  return truth;
}

inline void write_estimates(std::ostream& os, const std::vector<EstimateSample>& est) {
  os << "# " << kEstimateSchema << '\n';
  os << "t,px,py,pz,roll,pitch,yaw,augmented,bx,by,bz,mis_roll,mis_pitch,mis_yaw,calib_cov_trace\n";
  os << std::setprecision(17);
  for (const auto& e : est) {
    const Vec3 a = e.attitude.to_vector(), b = e.calib.beacon_world, m = e.calib.misalignment.to_vector();
    os << e.t << ',' << e.p_world.x() << ',' << e.p_world.y() << ',' << e.p_world.z() << ',' << a.x() << ','
       << a.y() << ',' << a.z() << ',' << (e.augmented ? 1 : 0) << ',' << b.x() << ',' << b.y() << ',' << b.z()
       << ',' << m.x() << ',' << m.y() << ',' << m.z() << ',' << e.calib_cov_trace << '\n';
  }
}

inline std::vector<EstimateSample> read_estimates(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != std::string("# ") + kEstimateSchema)
    throw FormatError(std::string("estimates: expected schema ") + kEstimateSchema);
  std::vector<EstimateSample> out;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == 't' || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string cell;
    std::array<double, 15> v{};
    for (auto& x : v) {
      if (!std::getline(ls, cell, ',')) throw FormatError("estimates: short row");
      x = std::stod(cell);
    }
    EstimateSample e;
    e.t = v[0];
    e.p_world = {v[1], v[2], v[3]};
    e.attitude = {v[4], v[5], v[6]};
    e.augmented = v[7] != 0.0;
    e.calib = {{v[8], v[9], v[10]}, {v[11], v[12], v[13]}};
    e.calib_cov_trace = v[14];
    out.push_back(e);
  }
  return out;
}

/// Final calibration estimate of a run, if it reached the augmented stage.
inline std::optional<CalibrationParams> final_calibration(const std::vector<EstimateSample>& est) {
  if (est.empty() || !est.back().augmented) return std::nullopt;
  return est.back().calib;
}

inline void write_trial_metrics_csv(std::ostream& os, const std::vector<TrialOutcome>& trials) {
  os << "trial,seed,completed,position_rmse_m,final_error_m,beacon_error_m,align_err_roll_deg,align_err_pitch_deg,"
        "align_err_yaw_deg,gate_rejections,init_window_s,diagnostic\n";
  os << std::setprecision(10);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& m = trials[i].metrics;
    os << i << ',' << trials[i].seed << ',' << (m.completed ? 1 : 0) << ',' << m.position_rmse << ','
       << m.final_position_error << ',';
    if (m.beacon_error) {
      const Vec3 a = *m.alignment_error * (180.0 / kPi);
      os << m.beacon_error->norm() << ',' << a.x() << ',' << a.y() << ',' << a.z();
    } else {
      os << ",,,";
    }
    os << ',' << m.gate_rejections << ',' << m.init_window << ',' << '"' << m.diagnostic << '"' << '\n';
  }
}

/// Plain-text table: mean and RMSE of beacon position and misalignment.
inline void write_summary(std::ostream& os, std::string_view label, const AggregateMetrics& a) {
  const Vec3 md = a.misalignment_mean * (180.0 / kPi);
  os << std::fixed << std::setprecision(2);
  os << label << "  trials " << a.n_completed << '/' << a.n_trials << '\n';
  if (a.n_calibrated > 0) {
    os << "  Mean   beacon [" << a.beacon_mean.x() << ", " << a.beacon_mean.y() << ", " << a.beacon_mean.z()
       << "] m   alignment [" << md.x() << ", " << md.y() << ", " << md.z() << "] deg\n";
    os << "  RMSE   beacon " << a.beacon_rmse << " m   alignment " << rad2deg(a.alignment_rmse) << " deg\n";
  }
  if (a.n_navigated > 0)
    os << "  position RMSE (mean over trials) " << a.mean_position_rmse << " m   median final error "
       << a.median_final_error << " m\n";
  os << std::defaultfloat;
}

}  // namespace auvnav
