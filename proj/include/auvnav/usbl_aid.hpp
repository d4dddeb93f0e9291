#pragma once

// Offline two-step calibration baseline: beacon from slant ranges and
// position fixes, then misalignment from DoA with the beacon held fixed.

#include "auvnav/init_nls.hpp"
#include "auvnav/sim.hpp"

#include <unsupported/Eigen/LevenbergMarquardt>

#include <vector>

namespace auvnav {

namespace detail {

struct RangeFunctor : Eigen::DenseFunctor<double> {
  const std::vector<UsblAidRecord>* records;

  explicit RangeFunctor(const std::vector<UsblAidRecord>& r)
      : Eigen::DenseFunctor<double>(3, static_cast<int>(r.size())), records(&r) {}

  int operator()(const InputType& b, ValueType& f) const {
    for (std::size_t i = 0; i < records->size(); ++i) {
      const auto& r = (*records)[i];
      f(i) = r.range - (Vec3(b) - r.gps).norm();
    }
    return 0;
  }
  int df(const InputType& b, JacobianType& j) const {
    for (std::size_t i = 0; i < records->size(); ++i) {
      const Vec3 d = Vec3(b) - (*records)[i].gps;
      j.row(i) = -d.transpose() / std::max(d.norm(), kMinDirectionNorm);
    }
    return 0;
  }
};

}  // namespace detail

struct BeaconFit {
  Vec3 beacon = Vec3::Zero();
  bool converged = false;
  int iterations = 0;
};

/// argmin_b sum (L_i - |b - p_i|)^2. Fixes from a single plane leave a mirror
/// ambiguity; the start is placed below the fixes so the solution is too.
inline BeaconFit localize_beacon_ranges(const std::vector<UsblAidRecord>& records) {
  if (records.size() < 3) throw std::invalid_argument("localize_beacon_ranges: need at least 3 records");
  Vec3 c = Vec3::Zero();
  for (const auto& r : records) c += r.gps;
  c /= static_cast<double>(records.size());
  double z2 = 0.0;
  for (const auto& r : records) z2 += r.range * r.range - (r.gps - c).head<2>().squaredNorm();
  Eigen::VectorXd b = c;
  b.z() += std::sqrt(std::max(1.0, z2 / records.size()));

  detail::RangeFunctor f(records);
  Eigen::LevenbergMarquardt<detail::RangeFunctor> lm(f);
  const auto status = lm.minimize(b);
  BeaconFit out;
  out.beacon = b;
  out.iterations = static_cast<int>(lm.iterations());
  out.converged = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall;
  return out;
}

/// Misalignment from DoA residuals with the vehicle pose taken from the
/// position fixes and the measured attitude, the beacon held at `beacon`.
inline InitSolution estimate_misalignment(const std::vector<UsblAidRecord>& records, const Vec3& beacon,
                                          const NlsOptions& opts = {}) {
  InitProblem p;
  p.min_constraints = 3;
  p.prior_gamma = {beacon, {}};
  Vector6 sd;
  sd << Vec3::Constant(1e-9), Vec3::Constant(1e3);  // beacon pinned, misalignment free
  p.prior_cov = sd.cwiseAbs2().asDiagonal();
  for (const auto& r : records) {
    InitConstraint c;
    c.kind = ConstraintKind::Doa;
    c.t = r.t;
    c.vehicle.p_world = r.gps;
    c.vehicle.attitude = r.attitude;
    c.bearing = r.bearing;
    c.elevation = r.elevation;
    c.noise = r.doa_noise;
    c.elevation_noise = r.doa_noise;
    p.constraints.push_back(c);
  }
  return solve_nls(p, opts);
}

struct UsblAidResult {
  CalibrationParams calib;
  BeaconFit beacon;
  InitSolution alignment;
};

inline UsblAidResult run_usbl_aid_calibration(const UsblAidData& data) {
  UsblAidResult out;
  out.beacon = localize_beacon_ranges(data.records);
  out.alignment = estimate_misalignment(data.records, out.beacon.beacon);
  out.calib = {out.beacon.beacon, out.alignment.gamma.misalignment};
  return out;
}

}  // namespace auvnav
