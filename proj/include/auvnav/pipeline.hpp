#pragma once

// Two-step estimator: dead reckoning while constraints accumulate, a robust
// least-squares solve for the calibration parameters, then the augmented
// filter with acoustic updates.

#include "auvnav/init_nls.hpp"
#include "auvnav/measurements.hpp"
#include "auvnav/state_models.hpp"
#include "auvnav/ukf.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace auvnav {

struct FilterConfig {
  double alpha = 1e-1;
  double beta = 2.0;
  double kappa = 0.0;
  double gate_multiplier = 3.0;
  // Process noise densities (diagonal). Position and attitude have none.
  double q_velocity = 1e-4;
  double q_accel = 2.5e-3;
  double q_rate = 1e-4;
  // Initial standard deviations about the launch state.
  double init_position_sigma = 0.1;
  Vec3 init_attitude_sigma{deg2rad(0.4), deg2rad(0.4), deg2rad(2.0)};
  double init_velocity_sigma = 0.04;
  double init_accel_sigma = 0.05;
  double init_rate_sigma = deg2rad(0.1);
  /// Estimates are logged on multiples of this period.
  double log_period = 1.0;
};

struct InitConfig {
  int min_constraints = 12;
  double min_observability_ratio = 1e-6;
  PriorOptions prior;
  RansacOptions ransac;
  /// Gauss-Newton covariance is scaled by this factor when handed to the filter.
  double cov_inflation = 2.0;
  /// After a failed attempt, wait for this many more DoA constraints.
  int retry_every = 3;
};

struct RunConfig {
  FilterConfig filter;
  InitConfig init;
  bool use_acoustic = true;
  /// false: misalignment held at zero (beacon position still estimated).
  bool estimate_misalignment = true;
};

struct EstimateSample {
  double t = 0.0;
  Vec3 p_world = Vec3::Zero();
  EulerAngles attitude;
  bool augmented = false;
  CalibrationParams calib;
  double calib_cov_trace = 0.0;
};

struct GateCounts {
  std::array<int, 6> accepted{};
  std::array<int, 6> rejected{};
  std::array<int, 6> degenerate{};

  void add(const UpdateReport& r) {
    const auto k = static_cast<std::size_t>(r.kind);
    if (r.degenerate) ++degenerate[k];
    else if (r.accepted) ++accepted[k];
    else ++rejected[k];
  }
  int total_rejected() const {
    int n = 0;
    for (int v : rejected) n += v;
    return n;
  }
};

struct InitReport {
  bool succeeded = false;
  int attempts = 0;
  double t_first = 0.0;  // first accumulated constraint
  double t_ready = 0.0;  // time of the successful solve
  int n_constraints = 0;
  int n_doa = 0;
  int n_doa_inliers = 0;
  /// Flagged DoA constraints that were injected outliers / clean records.
  int outliers_flagged = 0;
  int clean_flagged = 0;
  int outliers_total = 0;
  InitSolution solution;
  std::string last_error;
};

struct RunResult {
  std::vector<EstimateSample> estimates;
  InitReport init;
  GateCounts gates;
  std::optional<CalibrationParams> calib;
  std::size_t jitter_events = 0;
  bool aborted = false;
  std::string diagnostic;
};

namespace detail {

template <int N>
UkfParams<N> ukf_params(const FilterConfig& c) {
  UkfParams<N> p;
  p.alpha = c.alpha;
  p.beta = c.beta;
  p.kappa = c.kappa;
  p.gate_multiplier = c.gate_multiplier;
  p.process_noise.setZero();
  p.process_noise.template segment<3>(VehicleState::kVel).setConstant(c.q_velocity);
  p.process_noise.template segment<3>(VehicleState::kAcc).setConstant(c.q_accel);
  p.process_noise.template segment<3>(VehicleState::kRate).setConstant(c.q_rate);
  return p;
}

inline FilterState<15> initial_vehicle_state(const VehicleState& x0, double t0, const FilterConfig& c) {
  FilterState<15> s;
  s.mean = x0.to_vector();
  Vector15 sd;
  sd << Vec3::Constant(c.init_position_sigma), c.init_attitude_sigma, Vec3::Constant(c.init_velocity_sigma),
      Vec3::Constant(c.init_accel_sigma), Vec3::Constant(c.init_rate_sigma);
  s.cov = sd.cwiseAbs2().asDiagonal();
  s.t = t0;
  return s;
}

inline bool on_log_grid(double t, double period) {
  const double k = std::round(t / period);
  return std::abs(t - k * period) < 1e-9;
}

/// Drives `filter` over stream[begin, end), logging at the end of each
/// timestamp group. `on_acoustic` returns true to stop after that record.
template <typename Filter, typename Sample, typename Acoustic>
std::size_t drive(Filter& filter, const MeasurementStream& stream, std::size_t begin, const FilterConfig& cfg,
                  GateCounts& gates, std::vector<EstimateSample>& log, Sample&& sample, Acoustic&& on_acoustic) {
  for (std::size_t i = begin; i < stream.size(); ++i) {
    const MeasurementRecord& rec = stream[i];
    filter.predict_to(rec.t);
    bool stop = false;
    if (rec.is_acoustic()) {
      stop = on_acoustic(rec);
    } else {
      gates.add(filter.update_dead_reckoning(rec));
    }
    const bool group_end = i + 1 == stream.size() || stream[i + 1].t != rec.t;
    if (group_end && on_log_grid(rec.t, cfg.log_period) && (log.empty() || log.back().t < rec.t))
      log.push_back(sample(filter));
    if (stop) return i + 1;
  }
  return stream.size();
}

template <typename Model>
EstimateSample augmented_sample(const UnscentedFilter<Model>& f) {
  EstimateSample s;
  const VehicleState v = f.model().vehicle(f.state().mean);
  s.t = f.state().t;
  s.p_world = v.p_world;
  s.attitude = v.attitude;
  s.augmented = true;
  s.calib = f.model().calib(f.state().mean);
  s.calib_cov_trace = f.state().cov.template bottomRightCorner<Model::kDim - 15, Model::kDim - 15>().trace();
  return s;
}

inline void count_outlier_flags(const InitProblem& problem, const std::vector<const MeasurementRecord*>& sources,
                                InitReport& rep) {
  const auto& mask = rep.solution.inlier_mask;
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    if (problem.constraints[i].kind != ConstraintKind::Doa) continue;
    const bool outlier = sources[i]->injected_outlier;
    rep.outliers_total += outlier ? 1 : 0;
    if (mask[i]) ++rep.n_doa_inliers;
    else if (outlier) ++rep.outliers_flagged;
    else ++rep.clean_flagged;
  }
}

}  // namespace detail

/// Builds the initialization problem from a buffer; with the misalignment
/// frozen the misalignment prior is pinned at zero.
inline InitProblem init_problem(const ConstraintBuffer& buffer, bool estimate_misalignment) {
  InitProblem p = buffer.problem();
  if (!estimate_misalignment) {
    p.prior_gamma.misalignment = {};
    p.prior_cov.bottomRightCorner<3, 3>() = Mat3::Identity() * 1e-18;
  }
  return p;
}

/// Runs the two-step estimator over a time-ordered stream starting from the
/// launch state x0 at the time of the first record.
inline RunResult run_proposed(const MeasurementStream& stream, const VehicleState& x0, const RunConfig& cfg) {
  RunResult out;
  if (stream.empty()) return out;
  const double t0 = stream.front().t;

  UnscentedFilter<VehicleModel> dr(VehicleModel{}, detail::initial_vehicle_state(x0, t0, cfg.filter),
                                   detail::ukf_params<15>(cfg.filter));
  ConstraintBuffer buffer;
  buffer.min_constraints = cfg.init.min_constraints;
  buffer.min_observability_ratio = cfg.init.min_observability_ratio;
  buffer.prior = cfg.init.prior;
  std::vector<const MeasurementRecord*> sources;
  int doa_at_last_attempt = -1;

  auto dr_sample = [](const UnscentedFilter<VehicleModel>& f) {
    EstimateSample s;
    const VehicleState v = VehicleState::from_vector(f.state().mean);
    s.t = f.state().t;
    s.p_world = v.p_world;
    s.attitude = v.attitude;
    return s;
  };

  auto on_acoustic = [&](const MeasurementRecord& rec) {
    if (!cfg.use_acoustic) return false;
    const std::size_t before = buffer.constraints.size();
    const VehicleState x = VehicleState::from_vector(dr.state().mean);
    buffer.accumulate(rec, x);
    if (buffer.constraints.size() == before) return false;
    sources.push_back(&rec);
    if (before == 0) out.init.t_first = rec.t;
    if (rec.kind() != MeasurementKind::Doa) return false;
    const int n_doa = count_doa(buffer.constraints);
    if (n_doa < buffer.min_constraints) return false;
    if (doa_at_last_attempt >= 0 && n_doa - doa_at_last_attempt < cfg.init.retry_every) return false;
    if (!buffer.readiness().ready) return false;
    doa_at_last_attempt = n_doa;
    ++out.init.attempts;
    const InitProblem problem = init_problem(buffer, cfg.estimate_misalignment);
    try {
      InitSolution sol = solve_ransac(problem, cfg.init.ransac);
      if (sol.rank_deficient) {
        out.init.last_error = std::string("rank deficient: ") + std::string(degeneracy_name(sol.diagnosis));
        return false;
      }
      out.init.succeeded = true;
      out.init.t_ready = rec.t;
      out.init.n_constraints = static_cast<int>(problem.constraints.size());
      out.init.n_doa = n_doa;
      out.init.solution = std::move(sol);
      detail::count_outlier_flags(problem, sources, out.init);
      return true;
    } catch (const NoConsensusError& e) {
      out.init.last_error = e.what();
      return false;
    }
  };

  std::size_t next = detail::drive(dr, stream, 0, cfg.filter, out.gates, out.estimates, dr_sample, on_acoustic);
  out.jitter_events = dr.jitter_events();
  if (!cfg.use_acoustic) return out;
  if (!out.init.succeeded) {
    out.aborted = true;
    out.diagnostic = "initialization failed: " + (out.init.last_error.empty() ? "not ready" : out.init.last_error);
    return out;
  }

  const InitSolution& sol = out.init.solution;
  auto run_augmented = [&](auto model, const Eigen::MatrixXd& calib_cov, const Eigen::VectorXd& calib_mean) {
    using Model = decltype(model);
    constexpr int N = Model::kDim;
    FilterState<N> s;
    s.t = dr.state().t;
    s.mean.template head<15>() = dr.state().mean;
    s.mean.template tail<N - 15>() = calib_mean;
    s.cov.setZero();
    s.cov.template topLeftCorner<15, 15>() = dr.state().cov;
    s.cov.template bottomRightCorner<N - 15, N - 15>() = cfg.init.cov_inflation * calib_cov;
    UnscentedFilter<Model> f(model, s, detail::ukf_params<N>(cfg.filter));
    auto acoustic = [&](const MeasurementRecord& rec) {
      out.gates.add(f.update_acoustic(rec));
      return false;
    };
    detail::drive(f, stream, next, cfg.filter, out.gates, out.estimates, detail::augmented_sample<Model>, acoustic);
    out.calib = f.model().calib(f.state().mean);
    out.jitter_events += f.jitter_events();
  };

  if (cfg.estimate_misalignment) {
    run_augmented(AugmentedModel{}, sol.cov_estimate, sol.gamma.to_vector());
  } else {
    run_augmented(FixedMisalignmentModel{}, sol.cov_estimate.topLeftCorner<3, 3>(), sol.gamma.beacon_world);
  }
  return out;
}

/// Dead reckoning over AHRS, DVL and pressure only.
inline RunResult run_dr(const MeasurementStream& stream, const VehicleState& x0, RunConfig cfg) {
  cfg.use_acoustic = false;
  return run_proposed(stream, x0, cfg);
}

}  // namespace auvnav
