#pragma once

#include "auvnav/pipeline.hpp"
#include "auvnav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace auvnav {

/// Estimates and truth share no timestamps.
class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrialMetrics {
  bool completed = true;
  std::string diagnostic;
  double position_rmse = 0.0;
  double final_position_error = 0.0;
  double final_time = 0.0;
  std::size_t n_aligned = 0;
  std::optional<CalibrationParams> calib;
  std::optional<Vec3> beacon_error;
  std::optional<Vec3> alignment_error;  // rad, wrapped per axis
  int gate_rejections = 0;
  double init_window = 0.0;
};

inline Vec3 wrapped_difference(const EulerAngles& a, const EulerAngles& b) {
  const Vec3 d = a.to_vector() - b.to_vector();
  return {wrap_angle(d(0)), wrap_angle(d(1)), wrap_angle(d(2))};
}

/// Position errors at every estimate whose timestamp lies on the truth grid.
inline std::vector<std::pair<double, double>> position_errors(const std::vector<EstimateSample>& est,
                                                              const GroundTruthLog& truth) {
  std::vector<std::pair<double, double>> out;
  for (const auto& e : est) {
    const auto k = truth.index_of(e.t);
    if (!k) continue;
    out.emplace_back(e.t, (e.p_world - truth.states[*k].p_world).norm());
  }
  return out;
}

inline TrialMetrics compute_metrics(const std::vector<EstimateSample>& est, const GroundTruthLog& truth,
                                    const std::optional<CalibrationParams>& calib = std::nullopt) {
  const auto errors = position_errors(est, truth);
  if (errors.empty()) throw AlignmentError("compute_metrics: no common timestamps");
  TrialMetrics m;
  double se = 0.0;
  for (const auto& [t, e] : errors) se += e * e;
  m.n_aligned = errors.size();
  m.position_rmse = std::sqrt(se / errors.size());
  m.final_time = errors.back().first;
  m.final_position_error = errors.back().second;
  if (calib) {
    m.calib = calib;
    m.beacon_error = calib->beacon_world - truth.calib.beacon_world;
    m.alignment_error = wrapped_difference(calib->misalignment, truth.calib.misalignment);
  }
  return m;
}

inline TrialMetrics compute_metrics(const RunResult& run, const GroundTruthLog& truth) {
  TrialMetrics m = compute_metrics(run.estimates, truth, run.calib);
  m.completed = !run.aborted;
  m.diagnostic = run.diagnostic;
  m.gate_rejections = run.gates.total_rejected();
  if (run.init.succeeded) m.init_window = run.init.t_ready - run.init.t_first;
  return m;
}

/// Largest position error over estimates with t in [t0, t1].
inline double max_position_error(const std::vector<EstimateSample>& est, const GroundTruthLog& truth, double t0,
                                 double t1) {
  double mx = 0.0;
  bool any = false;
  for (const auto& [t, e] : position_errors(est, truth)) {
    if (t < t0 || t > t1) continue;
    mx = std::max(mx, e);
    any = true;
  }
  if (!any) throw AlignmentError("max_position_error: no estimates in window");
  return mx;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct AggregateMetrics {
  int n_trials = 0;
  int n_completed = 0;
  double mean_position_rmse = 0.0;
  double median_final_error = 0.0;
  /// sqrt(mean |error|^2) across completed trials with calibration estimates.
  double beacon_rmse = 0.0;
  double alignment_rmse = 0.0;  // rad, over the 3-vector
  Vec3 beacon_mean = Vec3::Zero();
  Vec3 misalignment_mean = Vec3::Zero();  // rad
  int n_calibrated = 0;
  /// Completed trials with a navigation solution; position statistics use these.
  int n_navigated = 0;
};

inline AggregateMetrics aggregate(const std::vector<TrialMetrics>& trials) {
  AggregateMetrics a;
  a.n_trials = static_cast<int>(trials.size());
  std::vector<double> finals;
  double sb = 0.0, sa = 0.0;
  for (const auto& t : trials) {
    if (!t.completed) continue;
    ++a.n_completed;
    if (t.n_aligned > 0) {
      ++a.n_navigated;
      a.mean_position_rmse += t.position_rmse;
      finals.push_back(t.final_position_error);
    }
    if (t.calib) {
      ++a.n_calibrated;
      sb += t.beacon_error->squaredNorm();
      sa += t.alignment_error->squaredNorm();
      a.beacon_mean += t.calib->beacon_world;
      a.misalignment_mean += t.calib->misalignment.to_vector();
    }
  }
  if (a.n_navigated > 0) a.mean_position_rmse /= a.n_navigated;
  a.median_final_error = median(finals);
  if (a.n_calibrated > 0) {
    a.beacon_rmse = std::sqrt(sb / a.n_calibrated);
    a.alignment_rmse = std::sqrt(sa / a.n_calibrated);
    a.beacon_mean /= a.n_calibrated;
    a.misalignment_mean /= a.n_calibrated;
  }
  return a;
}

}  // namespace auvnav
