#pragma once

// Rank analysis of the DoA constraint Jacobian with respect to the
// calibration parameters (misalignment as a Lie-algebra perturbation, and
// beacon position).

#include "auvnav/models.hpp"
#include "auvnav/noise.hpp"

#include <Eigen/SVD>

#include <ostream>
#include <random>
#include <string_view>
#include <vector>

namespace auvnav {

struct PerpendicularPair {
  Vec3 first;
  Vec3 second;
  /// The closed-form pair was not independent and an orthonormal completion
  /// of m was substituted.
  bool fallback = false;
};

inline PerpendicularPair perpendicular_pair(const Vec3& m) {
  const double n = m.norm();
  if (!(n > 0.0)) throw std::invalid_argument("perpendicular_pair: zero direction");
  PerpendicularPair out;
  out.first = Vec3(m.y(), -m.x(), 0.0);
  out.second = Vec3(m.z(), 0.0, -m.x());
  // first x second = m.x() * m, so the pair spans m's complement iff m.x() != 0.
  if (std::abs(m.x()) < 1e-9 * n) {
    const Vec3 u = m / n;
    const Vec3 seed = std::abs(u.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    out.first = u.cross(seed).normalized();
    out.second = u.cross(out.first);
    out.fallback = true;
  }
  return out;
}

struct DoaEntry {
  Vec3 p_vehicle = Vec3::Zero();
  Mat3 world_from_vehicle = Mat3::Identity();
  Vec3 m = Vec3::UnitX();  // measured direction in the array frame, any positive scale
};

struct DoaConstraintSet {
  std::vector<DoaEntry> entries;
  CalibrationParams calib;
};

enum class Degeneracy { Generic, SamePosition, Collinear, OtherDeficient };

inline constexpr std::string_view degeneracy_name(Degeneracy d) {
  switch (d) {
    case Degeneracy::Generic: return "generic";
    case Degeneracy::SamePosition: return "same-position";
    case Degeneracy::Collinear: return "collinear";
    case Degeneracy::OtherDeficient: return "other-deficient";
  }
  return "?";
}

struct ObservabilityReport {
  Eigen::MatrixXd y;  // 2k x 6, columns [phi | beacon]
  Eigen::VectorXd singular_values;
  int rank = 0;
  double ratio = 0.0;
  Degeneracy diagnosis = Degeneracy::Generic;
  int fallback_pairs = 0;
};

inline constexpr double kRankTolerance = 1e-9;

/// Constraint values for one entry under a left perturbation dphi of the
/// array-from-vehicle rotation and a given beacon position.
inline Eigen::Vector2d doa_constraint(const DoaEntry& e, const Mat3& array_from_vehicle, const Vec3& dphi,
                                      const Vec3& beacon) {
  const PerpendicularPair mp = perpendicular_pair(e.m);
  const Vec3 u = rotation_exp(dphi) * array_from_vehicle * e.world_from_vehicle.transpose() * (beacon - e.p_vehicle);
  return {mp.first.dot(u), mp.second.dot(u)};
}

inline Eigen::MatrixXd doa_jacobian(const DoaConstraintSet& set, int* fallback_pairs = nullptr) {
  const Mat3 array_from_vehicle = euler_to_rotation(set.calib.misalignment).transpose();
  const int k = static_cast<int>(set.entries.size());
  Eigen::MatrixXd y(2 * k, 6);
  int fallbacks = 0;
  for (int i = 0; i < k; ++i) {
    const DoaEntry& e = set.entries[i];
    const PerpendicularPair mp = perpendicular_pair(e.m);
    fallbacks += mp.fallback ? 1 : 0;
    const Mat3 a = array_from_vehicle * e.world_from_vehicle.transpose();
    const Vec3 u = a * (set.calib.beacon_world - e.p_vehicle);
    const Mat3 su = skew(u);
    y.block<1, 3>(2 * i, 0) = -mp.first.transpose() * su;
    y.block<1, 3>(2 * i + 1, 0) = -mp.second.transpose() * su;
    y.block<1, 3>(2 * i, 3) = mp.first.transpose() * a;
    y.block<1, 3>(2 * i + 1, 3) = mp.second.transpose() * a;
  }
  if (fallback_pairs) *fallback_pairs = fallbacks;
  return y;
}

inline bool all_same_position(const std::vector<DoaEntry>& entries, double tol) {
  for (const auto& e : entries)
    if ((e.p_vehicle - entries.front().p_vehicle).norm() > tol) return false;
  return true;
}

inline bool all_collinear_with_beacon(const std::vector<DoaEntry>& entries, const Vec3& beacon, double tol) {
  Vec3 axis = Vec3::Zero();
  for (const auto& e : entries) {
    const Vec3 d = beacon - e.p_vehicle;
    if (d.norm() > axis.norm()) axis = d;
  }
  if (axis.norm() == 0.0) return true;
  axis.normalize();
  for (const auto& e : entries)
    if (axis.cross(beacon - e.p_vehicle).norm() > tol) return false;
  return true;
}

/// Classifies a rank-deficient geometry by the two known exception patterns.
inline Degeneracy diagnose_deficiency(const std::vector<DoaEntry>& entries, const Vec3& beacon, double rel_tol = 1e-9) {
  double scale = 1.0;
  for (const auto& e : entries) scale = std::max(scale, (beacon - e.p_vehicle).norm());
  const double tol = rel_tol * scale;
  if (all_same_position(entries, tol)) return Degeneracy::SamePosition;
  if (all_collinear_with_beacon(entries, beacon, tol)) return Degeneracy::Collinear;
  return Degeneracy::OtherDeficient;
}

inline ObservabilityReport build_jacobian(const DoaConstraintSet& set) {
  if (set.entries.empty()) throw std::invalid_argument("build_jacobian: empty constraint set");
  ObservabilityReport r;
  r.y = doa_jacobian(set, &r.fallback_pairs);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r.y);
  r.singular_values = svd.singularValues();
  const double smax = r.singular_values(0);
  r.rank = 0;
  for (int i = 0; i < r.singular_values.size(); ++i)
    if (r.singular_values(i) > kRankTolerance * smax) ++r.rank;
  r.ratio = (r.singular_values.size() < 6 || smax == 0.0) ? 0.0 : r.singular_values(5) / smax;
  r.diagnosis = r.rank >= 6 ? Degeneracy::Generic : diagnose_deficiency(set.entries, set.calib.beacon_world);
  return r;
}

/// Central finite differences of the constraint functions at the
/// linearization point; returns max |analytic - numeric| / max(1, max |analytic|).
inline double verify_jacobian_fd(const DoaConstraintSet& set, double step = 1e-6) {
  const Eigen::MatrixXd y = doa_jacobian(set);
  const Mat3 av = euler_to_rotation(set.calib.misalignment).transpose();
  Eigen::MatrixXd fd(y.rows(), 6);
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    for (int c = 0; c < 6; ++c) {
      Vec3 dphi = Vec3::Zero();
      Vec3 beacon_p = set.calib.beacon_world, beacon_m = set.calib.beacon_world;
      Eigen::Vector2d fp, fm;
      if (c < 3) {
        dphi(c) = step;
        fp = doa_constraint(set.entries[i], av, dphi, beacon_p);
        fm = doa_constraint(set.entries[i], av, -dphi, beacon_m);
      } else {
        beacon_p(c - 3) += step;
        beacon_m(c - 3) -= step;
        fp = doa_constraint(set.entries[i], av, Vec3::Zero(), beacon_p);
        fm = doa_constraint(set.entries[i], av, Vec3::Zero(), beacon_m);
      }
      fd.block<2, 1>(2 * i, c) = (fp - fm) / (2 * step);
    }
  }
  return (y - fd).cwiseAbs().maxCoeff() / std::max(1.0, y.cwiseAbs().maxCoeff());
}

/// Consistent direction for a vehicle pose and calibration.
inline Vec3 consistent_direction(const Vec3& p_vehicle, const Mat3& world_from_vehicle, const CalibrationParams& calib) {
  return (euler_to_rotation(calib.misalignment).transpose() * world_from_vehicle.transpose() *
          (calib.beacon_world - p_vehicle))
      .normalized();
}

struct SweepConfig {
  std::vector<double> sigma_angle;   // rad
  std::vector<double> sigma_radius;  // m
  double mean_radius = 20.0;
  double min_radius = 1.0;
  int entries_per_sample = 3;
  int samples_per_cell = 500;
  std::uint64_t seed = 1;
  CalibrationParams calib{Vec3::Zero(), {deg2rad(3.0), deg2rad(6.0), deg2rad(9.0)}};
};

struct SweepCell {
  double sigma_angle = 0.0;
  double sigma_radius = 0.0;
  double mean_ratio = 0.0;
  int n_samples = 0;
};

/// Vehicle positions are drawn in beacon-centred spherical coordinates:
/// bearing and elevation ~ N(0, sigma_a^2), radius ~ N(mean, sigma_r^2)
/// (clamped below at min_radius). The same standard normal draws are reused
/// in every cell so that differences between cells come from the scale
/// parameters only.
inline std::vector<SweepCell> sweep_observability(const SweepConfig& cfg) {
  const int n = cfg.samples_per_cell;
  const int k = cfg.entries_per_sample;
  Rng rng = make_stream(cfg.seed, 0);
  std::normal_distribution<double> normal;
  std::vector<Eigen::Vector3d> draws(static_cast<std::size_t>(n) * k);
  for (auto& d : draws) d = Vec3(normal(rng), normal(rng), normal(rng));

  std::vector<SweepCell> out;
  for (double sr : cfg.sigma_radius) {
    for (double sa : cfg.sigma_angle) {
      double sum = 0.0;
      for (int s = 0; s < n; ++s) {
        DoaConstraintSet set;
        set.calib = cfg.calib;
        for (int j = 0; j < k; ++j) {
          const Vec3& d = draws[static_cast<std::size_t>(s) * k + j];
          const double bearing = sa * d(0);
          const double elevation = sa * d(1);
          const double r = std::max(cfg.min_radius, cfg.mean_radius + sr * d(2));
          DoaEntry e;
          e.p_vehicle = cfg.calib.beacon_world +
                        r * Vec3(std::cos(elevation) * std::cos(bearing), std::cos(elevation) * std::sin(bearing),
                                 std::sin(elevation));
          e.m = consistent_direction(e.p_vehicle, e.world_from_vehicle, cfg.calib);
          set.entries.push_back(e);
        }
        sum += build_jacobian(set).ratio;
      }
      out.push_back({sa, sr, sum / n, n});
    }
  }
  return out;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << "sigma_a_deg,sigma_r_m,mean_ratio,n_samples\n";
  for (const auto& c : cells)
    os << rad2deg(c.sigma_angle) << ',' << c.sigma_radius << ',' << c.mean_ratio << ',' << c.n_samples << '\n';
}

}  // namespace auvnav
