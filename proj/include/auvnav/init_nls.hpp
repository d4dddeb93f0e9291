#pragma once

// Batch initialization of beacon position and misalignment from acoustic
// records paired with dead-reckoned vehicle states. Dead-reckoned states are
// treated as exact.

#include "auvnav/measurements.hpp"
#include "auvnav/models.hpp"
#include "auvnav/observability.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace auvnav {

using Matrix6 = Eigen::Matrix<double, 6, 6>;

enum class ConstraintKind { Doa, Doppler, BeaconDepth };

struct InitConstraint {
  ConstraintKind kind = ConstraintKind::Doa;
  double t = 0.0;
  VehicleState vehicle;
  double bearing = 0.0;    // DoA
  double elevation = 0.0;  // DoA
  double value = 0.0;      // Doppler speed or beacon depth
  NoiseSpec noise;         // DoA bearing, Doppler, or depth
  NoiseSpec elevation_noise;

  int rows() const { return kind == ConstraintKind::Doa ? 2 : 1; }
};

/// Pairs an acoustic record with the vehicle state at its timestamp;
/// nullopt for dead-reckoning records.
inline std::optional<InitConstraint> make_constraint(const MeasurementRecord& rec, const VehicleState& x) {
  InitConstraint c;
  c.t = rec.t;
  c.vehicle = x;
  switch (rec.kind()) {
    case MeasurementKind::Doa: {
      const auto& m = rec.as<DoaMeasurement>();
      c.kind = ConstraintKind::Doa;
      c.bearing = m.bearing;
      c.elevation = m.elevation;
      c.noise = m.bearing_noise;
      c.elevation_noise = m.elevation_noise;
      return c;
    }
    case MeasurementKind::Doppler: {
      const auto& m = rec.as<DopplerMeasurement>();
      c.kind = ConstraintKind::Doppler;
      c.value = m.speed;
      c.noise = m.noise;
      return c;
    }
    case MeasurementKind::BeaconDepth: {
      const auto& m = rec.as<BeaconDepthMeasurement>();
      c.kind = ConstraintKind::BeaconDepth;
      c.value = m.depth;
      c.noise = m.noise;
      return c;
    }
    default:
      return std::nullopt;
  }
}

struct InitProblem {
  CalibrationParams prior_gamma;
  Matrix6 prior_cov = Matrix6::Identity();
  std::vector<InitConstraint> constraints;
  int min_constraints = 12;  // DoA constraints
};

inline int count_doa(const std::vector<InitConstraint>& cs) {
  return static_cast<int>(
      std::count_if(cs.begin(), cs.end(), [](const InitConstraint& c) { return c.kind == ConstraintKind::Doa; }));
}

struct Residuals {
  Eigen::VectorXd r;
  Eigen::MatrixXd j;              // d r / d [beacon, misalignment]
  std::vector<bool> degenerate;   // per constraint
  std::vector<int> row_offset;    // first row of each constraint
};

namespace detail {

/// Partial derivatives of the ZYX rotation with respect to roll, pitch, yaw.
inline std::array<Mat3, 3> euler_rotation_partials(const EulerAngles& e) {
  const Mat3 rx = rot_x(e.roll), ry = rot_y(e.pitch), rz = rot_z(e.yaw);
  return {rz * ry * rx * skew(Vec3::UnitX()), rz * ry * skew(Vec3::UnitY()) * rx, skew(Vec3::UnitZ()) * rz * ry * rx};
}

}  // namespace detail

/// Whitened residuals (measured minus predicted) and their Jacobian. Rows:
/// prior (6), then each constraint in order.
inline Residuals residuals_and_jacobian(const Vector6& gamma, const InitProblem& problem) {
  int rows = 6;
  for (const auto& c : problem.constraints) rows += c.rows();
  Residuals out;
  out.r = Eigen::VectorXd::Zero(rows);
  out.j = Eigen::MatrixXd::Zero(rows, 6);
  out.degenerate.assign(problem.constraints.size(), false);
  out.row_offset.resize(problem.constraints.size());

  const Eigen::LLT<Matrix6> prior_llt(problem.prior_cov);
  if (prior_llt.info() != Eigen::Success) throw std::invalid_argument("InitProblem: prior covariance not SPD");
  Vector6 d = gamma - problem.prior_gamma.to_vector();
  for (int k = 3; k < 6; ++k) d(k) = wrap_angle(d(k));
  const Matrix6 l = prior_llt.matrixL();
  out.r.head<6>() = l.triangularView<Eigen::Lower>().solve(d);
  out.j.topRows<6>() = l.triangularView<Eigen::Lower>().solve(Matrix6::Identity());

  const CalibrationParams calib = CalibrationParams::from_vector(gamma);
  const Mat3 ra = euler_to_rotation(calib.misalignment);
  const auto partials = detail::euler_rotation_partials(calib.misalignment);

  int row = 6;
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    const InitConstraint& c = problem.constraints[i];
    out.row_offset[i] = row;
    const Mat3 rv = c.vehicle.world_from_body();
    const Vec3 q = rv.transpose() * (calib.beacon_world - c.vehicle.p_world);
    switch (c.kind) {
      case ConstraintKind::Doa: {
        const Vec3 pa = ra.transpose() * q;
        const double r2 = pa.squaredNorm();
        const double rho2 = pa.x() * pa.x() + pa.y() * pa.y();
        if (r2 < kMinDirectionNorm * kMinDirectionNorm || rho2 <= 1e-24 * r2) {
          out.degenerate[i] = true;
          break;
        }
        const double rho = std::sqrt(rho2);
        const DoaPrediction pred = predict_doa(pa);
        Eigen::Matrix<double, 2, 3> dz_dpa;
        dz_dpa << -pa.y() / rho2, pa.x() / rho2, 0.0, -pa.x() * pa.z() / (r2 * rho), -pa.y() * pa.z() / (r2 * rho),
            rho / r2;
        Eigen::Matrix<double, 3, 6> dpa;
        dpa.leftCols<3>() = ra.transpose() * rv.transpose();
        for (int k = 0; k < 3; ++k) dpa.col(3 + k) = partials[k].transpose() * q;
        const double sb = c.noise.scale, se = c.elevation_noise.scale;
        out.r(row) = wrap_angle(c.bearing - c.noise.location - pred.bearing) / sb;
        out.r(row + 1) = (c.elevation - c.elevation_noise.location - pred.elevation) / se;
        const Eigen::Matrix<double, 2, 6> jz = dz_dpa * dpa;
        out.j.row(row) = -jz.row(0) / sb;
        out.j.row(row + 1) = -jz.row(1) / se;
        break;
      }
      case ConstraintKind::Doppler: {
        const double range = q.norm();
        if (range < kMinDirectionNorm) {
          out.degenerate[i] = true;
          break;
        }
        const Vec3& v = c.vehicle.v_body;
        const double s = q.dot(v) / range;
        const Vec3 ds_dq = (v - s * q / range) / range;
        out.r(row) = (c.value - c.noise.location - s) / c.noise.scale;
        out.j.block<1, 3>(row, 0) = -(ds_dq.transpose() * rv.transpose()) / c.noise.scale;
        break;
      }
      case ConstraintKind::BeaconDepth:
        out.r(row) = (c.value - c.noise.location - calib.beacon_world.z()) / c.noise.scale;
        out.j(row, 2) = -1.0 / c.noise.scale;
        break;
    }
    row += c.rows();
  }
  return out;
}

struct NlsOptions {
  int max_iterations = 200;
  double initial_damping = 1e-3;
  double gradient_tolerance = 1e-8;
  double cost_decrease_tolerance = 1e-12;  // relative to 1 + cost
  double rank_tolerance = 1e-8;            // relative singular value of the measurement Jacobian
  std::optional<Vector6> initial_guess;    // defaults to the prior
};

struct InitSolution {
  CalibrationParams gamma;
  Matrix6 cov_estimate = Matrix6::Zero();
  std::vector<bool> inlier_mask;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  bool rank_deficient = false;
  Degeneracy diagnosis = Degeneracy::Generic;
  std::vector<double> cost_history;  // accepted iterates, starting with the initial cost
};

inline double cost_of(const Residuals& r) { return r.r.squaredNorm(); }

/// Levenberg-Marquardt on the whitened residuals, damping scaled by the
/// diagonal of the normal matrix.
inline InitSolution solve_nls(const InitProblem& problem, const NlsOptions& opts = {}) {
  InitSolution sol;
  sol.inlier_mask.assign(problem.constraints.size(), true);
  Vector6 x = opts.initial_guess.value_or(problem.prior_gamma.to_vector());
  for (int k = 3; k < 6; ++k) x(k) = wrap_angle(x(k));
  Residuals res = residuals_and_jacobian(x, problem);
  double cost = cost_of(res);
  sol.cost_history.push_back(cost);
  double lambda = opts.initial_damping;

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Vector6 g = res.j.transpose() * res.r;
    if (g.cwiseAbs().maxCoeff() < opts.gradient_tolerance) {
      sol.converged = true;
      break;
    }
    const Matrix6 a = res.j.transpose() * res.j;
    bool accepted = false;
    bool stop = false;
    while (!accepted) {
      Matrix6 damped = a;
      damped.diagonal() += lambda * a.diagonal().cwiseMax(1e-12);
      const Vector6 step = -damped.ldlt().solve(g);
      Vector6 trial = x + step;
      for (int k = 3; k < 6; ++k) trial(k) = wrap_angle(trial(k));
      Residuals trial_res = residuals_and_jacobian(trial, problem);
      const double trial_cost = cost_of(trial_res);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double decrease = cost - trial_cost;
        x = trial;
        res = std::move(trial_res);
        cost = trial_cost;
        sol.cost_history.push_back(cost);
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (decrease < opts.cost_decrease_tolerance * (1.0 + cost) ||
            step.norm() < 1e-14 * (1.0 + x.norm())) {
          sol.converged = true;
          stop = true;
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          // No descent direction left at machine precision.
          sol.converged = true;
          stop = true;
          break;
        }
      }
    }
    if (stop) {
      ++it;
      break;
    }
  }
  sol.iterations = it;
  sol.gamma = CalibrationParams::from_vector(x);
  sol.final_cost = cost;

  const Matrix6 info = res.j.transpose() * res.j;
  sol.cov_estimate = info.ldlt().solve(Matrix6::Identity());
  sol.cov_estimate = 0.5 * (sol.cov_estimate + sol.cov_estimate.transpose()).eval();

  // Identifiability from the measurements alone; the prior always makes the
  // normal equations invertible.
  const Eigen::MatrixXd jm = res.j.bottomRows(res.j.rows() - 6);
  if (jm.rows() < 6) {
    sol.rank_deficient = true;
  } else {
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(jm).singularValues();
    sol.rank_deficient = !(sv(5) > opts.rank_tolerance * sv(0));
  }
  if (sol.rank_deficient) {
    std::vector<DoaEntry> entries;
    for (const auto& c : problem.constraints) {
      if (c.kind != ConstraintKind::Doa) continue;
      entries.push_back({c.vehicle.p_world, c.vehicle.world_from_body(), Vec3::UnitX()});
    }
    sol.diagnosis = entries.empty() ? Degeneracy::OtherDeficient
                                    : diagnose_deficiency(entries, sol.gamma.beacon_world, 1e-6);
  }
  return sol;
}

struct PriorOptions {
  double seed_range = 50.0;
  double beacon_sigma = 50.0;
  double misalignment_sigma = deg2rad(10.0);
};

/// Beacon on a DoA ray (zero misalignment) at the seed range, with its depth
/// replaced by the first beacon-depth record when there is one.
inline CalibrationParams ray_seed(const InitConstraint& doa, const std::vector<InitConstraint>& constraints,
                                  double seed_range) {
  const double ce = std::cos(doa.elevation);
  const Vec3 dir(ce * std::cos(doa.bearing), ce * std::sin(doa.bearing), std::sin(doa.elevation));
  Vec3 beacon = doa.vehicle.p_world + seed_range * doa.vehicle.world_from_body() * dir;
  const auto depth = std::find_if(constraints.begin(), constraints.end(),
                                  [](const InitConstraint& c) { return c.kind == ConstraintKind::BeaconDepth; });
  if (depth != constraints.end()) beacon.z() = depth->value;
  return {beacon, {0.0, 0.0, 0.0}};
}

class NoConsensusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RansacOptions {
  int iterations = 200;
  double inlier_threshold = 3.0;  // whitened residual norm per constraint
  int sample_size = 3;            // DoA constraints per minimal set
  int refine_rounds = 3;
  std::uint64_t seed = 1;
  NlsOptions nls;
  NlsOptions minimal_nls{.max_iterations = 50, .initial_guess = std::nullopt};
  double seed_range = 50.0;
};

/// Whitened residual norm of each constraint at gamma.
inline std::vector<double> constraint_residual_norms(const Vector6& gamma, const InitProblem& problem) {
  const Residuals res = residuals_and_jacobian(gamma, problem);
  std::vector<double> out(problem.constraints.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = res.degenerate[i] ? std::numeric_limits<double>::infinity()
                               : res.r.segment(res.row_offset[i], problem.constraints[i].rows()).norm();
  }
  return out;
}

inline InitProblem subproblem(const InitProblem& problem, const std::vector<bool>& keep) {
  InitProblem sub = problem;
  sub.constraints.clear();
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i]) sub.constraints.push_back(problem.constraints[i]);
  return sub;
}

/// Minimal sets are drawn from the DoA constraints, each joined by the
/// beacon-depth records of the same pings. Doppler only takes part in
/// consensus scoring and in the final solve.
inline InitSolution solve_ransac(const InitProblem& problem, const RansacOptions& opts = {}) {
  std::vector<int> doa_idx;
  for (std::size_t i = 0; i < problem.constraints.size(); ++i)
    if (problem.constraints[i].kind == ConstraintKind::Doa) doa_idx.push_back(static_cast<int>(i));
  std::vector<int> depth_idx;
  for (std::size_t i = 0; i < problem.constraints.size(); ++i)
    if (problem.constraints[i].kind == ConstraintKind::BeaconDepth) depth_idx.push_back(static_cast<int>(i));
  if (static_cast<int>(doa_idx.size()) < opts.sample_size)
    throw std::invalid_argument("solve_ransac: fewer DoA constraints than the minimal set");

  // Hypotheses are ranked by the truncated quadratic sum(min(r^2, T^2)),
  // which separates heavy-tailed inliers from gross outliers better than a
  // bare count.
  const double t2 = opts.inlier_threshold * opts.inlier_threshold;
  auto consensus = [&](const Vector6& gamma) {
    const std::vector<double> norms = constraint_residual_norms(gamma, problem);
    std::vector<bool> mask(norms.size());
    double score = 0.0;
    for (std::size_t i = 0; i < norms.size(); ++i) {
      mask[i] = norms[i] < opts.inlier_threshold;
      score += std::min(norms[i] * norms[i], t2);
    }
    return std::pair{mask, score};
  };

  // Local optimization: refit on the consensus set and rescore until the
  // set stops changing or the score stops improving.
  auto refine = [&](std::vector<bool> mask, double score, const Vector6& start) {
    NlsOptions lo = opts.nls;
    lo.initial_guess = start;
    InitSolution sol = solve_nls(subproblem(problem, mask), lo);
    for (int round = 0; round < opts.refine_rounds; ++round) {
      auto [next, next_score] = consensus(sol.gamma.to_vector());
      if (next_score > score) break;
      score = next_score;
      if (next == mask) break;
      mask = std::move(next);
      lo.initial_guess = sol.gamma.to_vector();
      sol = solve_nls(subproblem(problem, mask), lo);
    }
    sol.inlier_mask = mask;
    return std::pair{sol, score};
  };

  Rng rng(opts.seed);
  std::optional<InitSolution> best;
  double best_score = std::numeric_limits<double>::infinity();
  double best_raw_score = std::numeric_limits<double>::infinity();
  std::vector<int> sample(opts.sample_size);
  for (int it = 0; it < opts.iterations; ++it) {
    std::sample(doa_idx.begin(), doa_idx.end(), sample.begin(), opts.sample_size, rng);
    std::vector<bool> keep(problem.constraints.size(), false);
    for (int i : sample) {
      keep[i] = true;
      for (int d : depth_idx)
        if (problem.constraints[d].t == problem.constraints[i].t) keep[d] = true;
    }
    // Each hypothesis starts from the ray of its own first sampled DoA.
    NlsOptions minimal_opts = opts.minimal_nls;
    minimal_opts.initial_guess =
        ray_seed(problem.constraints[sample.front()], problem.constraints, opts.seed_range).to_vector();
    const InitSolution minimal = solve_nls(subproblem(problem, keep), minimal_opts);
    auto [mask, score] = consensus(minimal.gamma.to_vector());
    if (!(score < best_raw_score)) continue;
    best_raw_score = score;
    auto [sol, lo_score] = refine(std::move(mask), score, minimal.gamma.to_vector());
    if (lo_score < best_score) {
      best = std::move(sol);
      best_score = lo_score;
    }
  }

  InitSolution sol = *best;
  const std::vector<bool>& mask = sol.inlier_mask;
  int doa_inliers = 0;
  for (int i : doa_idx) doa_inliers += mask[i] ? 1 : 0;
  if (doa_inliers < problem.min_constraints)
    throw NoConsensusError("solve_ransac: " + std::to_string(doa_inliers) + " DoA inliers, need " +
                           std::to_string(problem.min_constraints));
  return sol;
}

/// Prior seeded from the first DoA record.
inline InitProblem default_problem(std::vector<InitConstraint> constraints, int min_constraints = 12,
                                   const PriorOptions& opts = {}) {
  InitProblem p;
  p.min_constraints = min_constraints;
  const auto first_doa = std::find_if(constraints.begin(), constraints.end(),
                                      [](const InitConstraint& c) { return c.kind == ConstraintKind::Doa; });
  if (first_doa != constraints.end()) p.prior_gamma = ray_seed(*first_doa, constraints, opts.seed_range);
  Vector6 sd;
  sd << Vec3::Constant(opts.beacon_sigma), Vec3::Constant(opts.misalignment_sigma);
  p.prior_cov = sd.cwiseAbs2().asDiagonal();
  p.constraints = std::move(constraints);
  return p;
}

struct Readiness {
  std::size_t size = 0;
  bool ready = false;
  double observability_ratio = 0.0;
};

/// Constraint accumulation during dead reckoning. Readiness requires
/// min_constraints DoA records and a DoA geometry whose singular-value ratio,
/// evaluated at the default prior with self-consistent directions, clears
/// min_observability_ratio.
struct ConstraintBuffer {
  std::vector<InitConstraint> constraints;
  int min_constraints = 12;
  double min_observability_ratio = 1e-6;
  PriorOptions prior;

  Readiness accumulate(const MeasurementRecord& rec, const VehicleState& dr_state) {
    if (auto c = make_constraint(rec, dr_state)) constraints.push_back(*c);
    return readiness();
  }

  Readiness readiness() const {
    Readiness r;
    r.size = constraints.size();
    if (count_doa(constraints) < min_constraints) return r;
    const InitProblem p = default_problem(constraints, min_constraints, prior);
    DoaConstraintSet set;
    set.calib = p.prior_gamma;
    for (const auto& c : constraints) {
      if (c.kind != ConstraintKind::Doa) continue;
      DoaEntry e;
      e.p_vehicle = c.vehicle.p_world;
      e.world_from_vehicle = c.vehicle.world_from_body();
      const Vec3 d = set.calib.beacon_world - e.p_vehicle;
      if (d.norm() < kMinDirectionNorm) return r;
      e.m = consistent_direction(e.p_vehicle, e.world_from_vehicle, set.calib);
      set.entries.push_back(e);
    }
    const ObservabilityReport obs = build_jacobian(set);
    r.observability_ratio = obs.ratio;
    r.ready = obs.rank == 6 && obs.ratio >= min_observability_ratio;
    return r;
  }

  InitProblem problem() const { return default_problem(constraints, min_constraints, prior); }
  void clear() { constraints.clear(); }
};

}  // namespace auvnav
