#pragma once

// Monte Carlo trials over simulated scenarios.

#include "auvnav/metrics.hpp"
#include "auvnav/pipeline.hpp"
#include "auvnav/sim.hpp"
#include "auvnav/usbl_aid.hpp"

#include <algorithm>
#include <atomic>
#include <string_view>
#include <thread>
#include <vector>

namespace auvnav {

enum class RunMode { Proposed, DeadReckoning, MisalignmentIgnorant, UsblAid };

inline constexpr std::string_view run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::Proposed: return "proposed";
    case RunMode::DeadReckoning: return "dr";
    case RunMode::MisalignmentIgnorant: return "misalignment_ignorant";
    case RunMode::UsblAid: return "usbl_aid_calibration";
  }
  return "?";
}

/// Per-trial seed derived from the master seed and the trial index.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
  Rng r = make_stream(master, 0x7269616cULL + trial);
  return r();
}

/// f(i) for i in [0, n), on up to `threads` workers (0: hardware
/// concurrency). Results are stored by index.
template <typename F>
auto parallel_map(int n, F&& f, int threads = 0) {
  using R = decltype(f(0));
  std::vector<R> out(static_cast<std::size_t>(n));
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, std::max(n, 1));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) out[static_cast<std::size_t>(i)] = f(i);
  };
  if (workers == 1) {
    work();
    return out;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();
  return out;
}

struct TrialOutcome {
  std::uint64_t seed = 0;
  TrialMetrics metrics;
  InitReport init;
};

inline RunResult run_mode(RunMode mode, const MeasurementStream& stream, const VehicleState& x0, RunConfig rc) {
  switch (mode) {
    case RunMode::DeadReckoning: return run_dr(stream, x0, rc);
    case RunMode::MisalignmentIgnorant: rc.estimate_misalignment = false; return run_proposed(stream, x0, rc);
    default: return run_proposed(stream, x0, rc);
  }
}

inline TrialOutcome run_trial(ScenarioConfig sc, const RunConfig& rc, RunMode mode, std::uint64_t seed,
                              double bearing_offset = 0.0) {
  sc.seed = seed;
  TrialOutcome out;
  out.seed = seed;
  if (mode == RunMode::UsblAid) {
    UsblAidConfig uc;
    uc.scenario = UsblAidConfig::surface_scenario(sc);
    const UsblAidData data = generate_usbl_aid(uc);
    const UsblAidResult r = run_usbl_aid_calibration(data);
    out.metrics.calib = r.calib;
    out.metrics.beacon_error = r.calib.beacon_world - data.calib.beacon_world;
    out.metrics.alignment_error = wrapped_difference(r.calib.misalignment, data.calib.misalignment);
    out.metrics.completed = r.beacon.converged;
    if (!out.metrics.completed) out.metrics.diagnostic = "range fit did not converge";
    return out;
  }
  const GroundTruthLog truth = generate_truth(sc);
  MeasurementStream stream = generate_measurements(truth, sc);
  if (bearing_offset != 0.0) stream = apply_bearing_offset(std::move(stream), bearing_offset);
  const RunResult run = run_mode(mode, stream, truth.states.front(), rc);
  out.metrics = compute_metrics(run, truth);
  out.init = run.init;
  out.init.solution.cost_history.clear();
  return out;
}

struct CampaignResult {
  std::vector<TrialOutcome> trials;
  AggregateMetrics aggregate;
};

inline CampaignResult run_campaign(const ScenarioConfig& sc, const RunConfig& rc, RunMode mode, int trials,
                                   std::uint64_t master_seed, int threads = 0, double bearing_offset = 0.0) {
  if (trials < 1) throw ConfigError("campaign: trials must be at least 1");
  CampaignResult out;
  out.trials = parallel_map(
      trials, [&](int i) { return run_trial(sc, rc, mode, trial_seed(master_seed, i), bearing_offset); }, threads);
  std::vector<TrialMetrics> m;
  for (const auto& t : out.trials) m.push_back(t.metrics);
  out.aggregate = aggregate(m);
  return out;
}

struct OutageStudy {
  double window_start = 1100.0;
  double window_end = 1250.0;
  double proposed_max_error = 0.0;
  double dr_max_error = 0.0;
  /// Max error in the window minus the error at its start.
  double proposed_additional = 0.0;
  double dr_additional = 0.0;
  std::vector<EstimateSample> proposed_extract;
  std::vector<EstimateSample> dr_extract;
  std::vector<EstimateSample> truth_extract;
};

/// Proposed and dead reckoning on one stream with the scenario's outages;
/// estimates over [t0, t1] are extracted.
inline OutageStudy run_outage_study(const ScenarioConfig& sc, const RunConfig& rc, double t0 = 1100.0,
                                    double t1 = 1250.0) {
  const GroundTruthLog truth = generate_truth(sc);
  const MeasurementStream stream = generate_measurements(truth, sc);
  const RunResult prop = run_proposed(stream, truth.states.front(), rc);
  const RunResult dr = run_dr(stream, truth.states.front(), rc);
  OutageStudy s;
  s.window_start = t0;
  s.window_end = t1;
  s.proposed_max_error = max_position_error(prop.estimates, truth, t0, t1);
  s.dr_max_error = max_position_error(dr.estimates, truth, t0, t1);
  auto error_at = [&](const std::vector<EstimateSample>& est) {
    for (const auto& e : est)
      if (e.t >= t0) return (e.p_world - truth.states[*truth.index_of(e.t)].p_world).norm();
    return 0.0;
  };
  s.proposed_additional = s.proposed_max_error - error_at(prop.estimates);
  s.dr_additional = s.dr_max_error - error_at(dr.estimates);
  auto extract = [&](const std::vector<EstimateSample>& est, std::vector<EstimateSample>& dst) {
    for (const auto& e : est)
      if (e.t >= t0 && e.t <= t1) dst.push_back(e);
  };
  extract(prop.estimates, s.proposed_extract);
  extract(dr.estimates, s.dr_extract);
  for (const auto& e : s.proposed_extract) {
    EstimateSample x;
    x.t = e.t;
    const VehicleState& v = truth.states[*truth.index_of(e.t)];
    x.p_world = v.p_world;
    x.attitude = v.attitude;
    s.truth_extract.push_back(x);
  }
  return s;
}

}  // namespace auvnav
