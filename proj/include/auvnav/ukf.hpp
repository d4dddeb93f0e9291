#pragma once

// Unscented Kalman filter over a state-model policy.
//
// A Model provides:
//   static constexpr int kDim;
//   static constexpr std::array<int, K> kAngleIndices;   // circular components
//   Eigen::Matrix<double, kDim, 1> propagate(const State&, double dt, double guard) const;
//   VehicleState vehicle(const State&) const;
// and, for acoustic updates,
//   CalibrationParams calib(const State&) const;
//   static constexpr int kBeaconIndex;                   // beacon x; y,z follow
// Optional: static constexpr std::array<int, K> kConstantIndices, held
// exactly through predict.

#include "auvnav/geometry.hpp"
#include "auvnav/measurements.hpp"
#include "auvnav/models.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>

namespace auvnav {

/// Raised when the covariance cannot be factorized even after jitter.
class CovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxMeasurementDim = 9;
using InnovationVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxMeasurementDim, 1>;

/// Per-component outcome of the innovation gate. Bit i set = component i rejected.
struct GateResult {
  std::uint32_t rejected_mask = 0;

  bool accepted() const { return rejected_mask == 0; }
  bool component_accepted(int i) const { return ((rejected_mask >> i) & 1u) == 0; }
};

/// Component i passes iff |nu_i| < multiplier * sqrt(S_ii). The comparison is
/// strict, so a residual exactly on the boundary is rejected.
template <typename VecDerived, typename MatDerived>
GateResult gate(const Eigen::MatrixBase<VecDerived>& innovation, const Eigen::MatrixBase<MatDerived>& innovation_cov,
                double multiplier) {
  GateResult out;
  for (Eigen::Index i = 0; i < innovation.size(); ++i) {
    const double s = innovation_cov(i, i);
    const bool ok = s > 0.0 && std::abs(innovation(i)) < multiplier * std::sqrt(s);
    if (!ok) out.rejected_mask |= (1u << i);
  }
  return out;
}

template <int N>
struct UkfParams {
  double alpha = 1e-1;
  double beta = 2.0;
  double kappa = 0.0;
  /// Diagonal continuous-time process noise density; Q = diag(process_noise) * dt.
  Eigen::Matrix<double, N, 1> process_noise = Eigen::Matrix<double, N, 1>::Zero();
  double gate_multiplier = 3.0;
  /// Apply the gate to AHRS/DVL/pressure updates as well as acoustic ones.
  bool gate_dead_reckoning = true;
  double gimbal_guard = kDefaultGimbalGuard;
};

template <int N>
struct FilterState {
  Eigen::Matrix<double, N, 1> mean = Eigen::Matrix<double, N, 1>::Zero();
  Eigen::Matrix<double, N, N> cov = Eigen::Matrix<double, N, N>::Identity();
  double t = 0.0;
};

struct UpdateReport {
  MeasurementKind kind = MeasurementKind::Ahrs;
  bool accepted = false;
  /// Measurement function undefined at some sigma point (e.g. beacon on the array axis).
  bool degenerate = false;
  GateResult gate;
  InnovationVector innovation;
  InnovationVector innovation_std;
};

template <typename Model>
class UnscentedFilter {
 public:
  static constexpr int N = Model::kDim;
  static constexpr int kNumSigma = 2 * N + 1;
  using State = Eigen::Matrix<double, N, 1>;
  using Cov = Eigen::Matrix<double, N, N>;
  using SigmaSet = Eigen::Matrix<double, N, kNumSigma>;
  using Params = UkfParams<N>;

  UnscentedFilter(Model model, FilterState<N> initial, Params params)
      : model_(std::move(model)), state_(std::move(initial)), params_(std::move(params)) {
    const double lambda = params_.alpha * params_.alpha * (N + params_.kappa) - N;
    spread_ = std::sqrt(N + lambda);
    wm_.setConstant(1.0 / (2.0 * (N + lambda)));
    wc_ = wm_;
    wm_(0) = lambda / (N + lambda);
    wc_(0) = wm_(0) + (1.0 - params_.alpha * params_.alpha + params_.beta);
    symmetrize(state_.cov);
  }

  const FilterState<N>& state() const { return state_; }
  FilterState<N>& mutable_state() { return state_; }
  const Params& params() const { return params_; }
  const Model& model() const { return model_; }
  std::size_t jitter_events() const { return jitter_events_; }

  /// Time update through the process model over all sigma points.
  void predict(double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("UnscentedFilter::predict: dt must be positive");
    const SigmaSet sigma = sigma_points();
    SigmaSet propagated;
    for (int i = 0; i < kNumSigma; ++i) {
      propagated.col(i) = model_.propagate(sigma.col(i), dt, params_.gimbal_guard);
    }
    const State mean = weighted_mean(propagated);
    Cov cov = Cov::Zero();
    for (int i = 0; i < kNumSigma; ++i) {
      const State d = state_residual(propagated.col(i), mean);
      cov.noalias() += wc_(i) * d * d.transpose();
    }
    cov.diagonal() += params_.process_noise * dt;
    symmetrize(cov);
    State next = mean;
    if constexpr (requires { Model::kConstantIndices; }) {
      // Sigma-point averaging perturbs constants in the last bit.
      for (int i : Model::kConstantIndices) next(i) = state_.mean(i);
    }
    state_.mean = next;
    state_.cov = cov;
    state_.t += dt;
  }

  /// Predicts forward to time t (no-op when t is not ahead of the filter).
  void predict_to(double t) {
    if (t > state_.t) predict(t - state_.t);
  }

  /// Sigma-point measurement update. `h` maps a state to
  /// std::optional<Eigen::Matrix<double, M, 1>>; nullopt marks a degenerate
  /// evaluation and rejects the measurement.
  template <int M, typename H>
  UpdateReport update_sigma(MeasurementKind kind, const Eigen::Matrix<double, M, 1>& z,
                            const Eigen::Matrix<double, M, M>& r, const std::array<bool, M>& angle_mask, H&& h,
                            bool apply_gate = true) {
    using ZVec = Eigen::Matrix<double, M, 1>;
    UpdateReport report;
    report.kind = kind;
    const SigmaSet sigma = sigma_points();
    Eigen::Matrix<double, M, kNumSigma> zs;
    for (int i = 0; i < kNumSigma; ++i) {
      const auto zi = h(State(sigma.col(i)));
      if (!zi) {
        report.degenerate = true;
        return report;
      }
      zs.col(i) = *zi;
    }
    ZVec zhat = ZVec::Zero();
    for (int i = 0; i < kNumSigma; ++i) zhat.noalias() += wm_(i) * zs.col(i);
    for (int k = 0; k < M; ++k) {
      if (!angle_mask[k]) continue;
      double s = 0.0, c = 0.0;
      for (int i = 0; i < kNumSigma; ++i) {
        s += wm_(i) * std::sin(zs(k, i));
        c += wm_(i) * std::cos(zs(k, i));
      }
      zhat(k) = std::atan2(s, c);
    }
    Eigen::Matrix<double, M, M> s = r;
    Eigen::Matrix<double, N, M> cross = Eigen::Matrix<double, N, M>::Zero();
    for (int i = 0; i < kNumSigma; ++i) {
      ZVec dz = zs.col(i) - zhat;
      for (int k = 0; k < M; ++k)
        if (angle_mask[k]) dz(k) = wrap_angle(dz(k));
      const State dx = state_residual(sigma.col(i), state_.mean);
      s.noalias() += wc_(i) * dz * dz.transpose();
      cross.noalias() += wc_(i) * dx * dz.transpose();
    }
    return apply_update<M>(kind, z, zhat, s, cross, angle_mask, apply_gate, report);
  }

  /// Update for a measurement that directly observes state components `idx`.
  /// Equivalent to update_sigma with h(x) = x[idx], since the unscented
  /// transform of a linear map is exact.
  template <int M>
  UpdateReport update_direct(MeasurementKind kind, const std::array<int, M>& idx,
                             const Eigen::Matrix<double, M, 1>& z, const Eigen::Matrix<double, M, M>& r,
                             const std::array<bool, M>& angle_mask, bool apply_gate = true) {
    UpdateReport report;
    report.kind = kind;
    Eigen::Matrix<double, M, 1> zhat;
    Eigen::Matrix<double, M, M> s;
    Eigen::Matrix<double, N, M> cross;
    for (int a = 0; a < M; ++a) {
      zhat(a) = state_.mean(idx[a]);
      cross.col(a) = state_.cov.col(idx[a]);
      for (int b = 0; b < M; ++b) s(a, b) = state_.cov(idx[a], idx[b]);
    }
    s += r;
    return apply_update<M>(kind, z, zhat, s, cross, angle_mask, apply_gate, report);
  }

  // Sensor-level updates.

  UpdateReport update_ahrs(const AhrsMeasurement& m) {
    static constexpr std::array<int, 9> idx = {
        VehicleState::kAtt,      VehicleState::kAtt + 1,  VehicleState::kAtt + 2,
        VehicleState::kRate,     VehicleState::kRate + 1, VehicleState::kRate + 2,
        VehicleState::kAcc,      VehicleState::kAcc + 1,  VehicleState::kAcc + 2};
    static constexpr std::array<bool, 9> angles = {true, true, true, false, false, false, false, false, false};
    Eigen::Matrix<double, 9, 1> z;
    Eigen::Matrix<double, 9, 1> var;
    for (int k = 0; k < 3; ++k) {
      z(k) = m.attitude.to_vector()(k) - m.attitude_noise[k].location;
      var(k) = m.attitude_noise[k].weighting_variance();
      z(3 + k) = m.rate(k) - m.rate_noise.location;
      var(3 + k) = m.rate_noise.weighting_variance();
      z(6 + k) = m.accel(k) - m.accel_noise.location;
      var(6 + k) = m.accel_noise.weighting_variance();
    }
    return update_direct<9>(MeasurementKind::Ahrs, idx, z, var.asDiagonal().toDenseMatrix(), angles,
                            params_.gate_dead_reckoning);
  }

  UpdateReport update_dvl(const DvlMeasurement& m) {
    static constexpr std::array<int, 3> idx = {VehicleState::kVel, VehicleState::kVel + 1, VehicleState::kVel + 2};
    const Eigen::Vector3d z = m.v_body - Eigen::Vector3d::Constant(m.noise.location);
    const Eigen::Matrix3d r = Eigen::Matrix3d::Identity() * m.noise.weighting_variance();
    return update_direct<3>(MeasurementKind::Dvl, idx, z, r, {false, false, false}, params_.gate_dead_reckoning);
  }

  UpdateReport update_pressure(const PressureMeasurement& m) {
    Eigen::Matrix<double, 1, 1> z{m.z_world - m.noise.location};
    Eigen::Matrix<double, 1, 1> r{m.noise.weighting_variance()};
    return update_direct<1>(MeasurementKind::Pressure, {VehicleState::kPos + 2}, z, r, {false},
                            params_.gate_dead_reckoning);
  }

  UpdateReport update_beacon_depth(const BeaconDepthMeasurement& m) {
    Eigen::Matrix<double, 1, 1> z{m.depth - m.noise.location};
    Eigen::Matrix<double, 1, 1> r{m.noise.weighting_variance()};
    return update_direct<1>(MeasurementKind::BeaconDepth, {Model::kBeaconIndex + 2}, z, r, {false});
  }

  UpdateReport update_doa(const DoaMeasurement& m) {
    const Eigen::Vector2d z{m.bearing - m.bearing_noise.location, m.elevation - m.elevation_noise.location};
    const Eigen::Matrix2d r =
        Eigen::Vector2d{m.bearing_noise.weighting_variance(), m.elevation_noise.weighting_variance()}
            .asDiagonal()
            .toDenseMatrix();
    auto h = [this](const State& x) -> std::optional<Eigen::Vector2d> {
      const Vec3 pa = beacon_in_array_frame(model_.vehicle(x), model_.calib(x));
      if (pa.norm() < kMinDirectionNorm) return std::nullopt;
      const DoaPrediction d = predict_doa(pa);
      if (!d.bearing_defined) return std::nullopt;
      return Eigen::Vector2d{d.bearing, d.elevation};
    };
    return update_sigma<2>(MeasurementKind::Doa, z, r, {true, true}, h);
  }

  UpdateReport update_doppler(const DopplerMeasurement& m) {
    Eigen::Matrix<double, 1, 1> z{m.speed - m.noise.location};
    Eigen::Matrix<double, 1, 1> r{m.noise.weighting_variance()};
    auto h = [this](const State& x) -> std::optional<Eigen::Matrix<double, 1, 1>> {
      const VehicleState v = model_.vehicle(x);
      const Vec3 pv = beacon_in_vehicle_frame(v, model_.calib(x).beacon_world);
      if (pv.norm() < kMinDirectionNorm) return std::nullopt;
      return Eigen::Matrix<double, 1, 1>{predict_doppler(pv, v.v_body)};
    };
    return update_sigma<1>(MeasurementKind::Doppler, z, r, {false}, h);
  }

  /// Dispatches a dead-reckoning record (AHRS/DVL/pressure).
  UpdateReport update_dead_reckoning(const MeasurementRecord& rec) {
    switch (rec.kind()) {
      case MeasurementKind::Ahrs: return update_ahrs(rec.as<AhrsMeasurement>());
      case MeasurementKind::Dvl: return update_dvl(rec.as<DvlMeasurement>());
      case MeasurementKind::Pressure: return update_pressure(rec.as<PressureMeasurement>());
      default: throw std::invalid_argument("update_dead_reckoning: not a dead-reckoning record");
    }
  }

  /// Dispatches an acoustic record (DoA/Doppler/beacon depth).
  UpdateReport update_acoustic(const MeasurementRecord& rec) {
    switch (rec.kind()) {
      case MeasurementKind::Doa: return update_doa(rec.as<DoaMeasurement>());
      case MeasurementKind::Doppler: return update_doppler(rec.as<DopplerMeasurement>());
      case MeasurementKind::BeaconDepth: return update_beacon_depth(rec.as<BeaconDepthMeasurement>());
      default: throw std::invalid_argument("update_acoustic: not an acoustic record");
    }
  }

 private:
  static void symmetrize(Cov& p) { p = 0.5 * (p + p.transpose()).eval(); }

  static State state_residual(const State& a, const State& b) {
    State d = a - b;
    for (int i : Model::kAngleIndices) d(i) = wrap_angle(d(i));
    return d;
  }

  SigmaSet sigma_points() {
    Cov scaled = (spread_ * spread_) * state_.cov;
    Eigen::LLT<Cov> llt(scaled);
    if (llt.info() != Eigen::Success) {
      const double base = std::max(1.0, scaled.diagonal().cwiseAbs().maxCoeff());
      double jitter = 1e-12 * base;
      bool ok = false;
      for (int attempt = 0; attempt < 8 && !ok; ++attempt, jitter *= 10.0) {
        ++jitter_events_;
        llt.compute(scaled + jitter * Cov::Identity());
        ok = llt.info() == Eigen::Success;
      }
      if (!ok) throw CovarianceError("UnscentedFilter: covariance factorization failed");
    }
    const Cov l = llt.matrixL();
    SigmaSet sigma;
    sigma.col(0) = state_.mean;
    for (int i = 0; i < N; ++i) {
      sigma.col(1 + i) = state_.mean + l.col(i);
      sigma.col(1 + N + i) = state_.mean - l.col(i);
    }
    return sigma;
  }

  State weighted_mean(const SigmaSet& pts) const {
    State mean = pts * wm_;
    for (int k : Model::kAngleIndices) {
      double s = 0.0, c = 0.0;
      for (int i = 0; i < kNumSigma; ++i) {
        s += wm_(i) * std::sin(pts(k, i));
        c += wm_(i) * std::cos(pts(k, i));
      }
      mean(k) = std::atan2(s, c);
    }
    return mean;
  }

  template <int M>
  UpdateReport apply_update(MeasurementKind kind, const Eigen::Matrix<double, M, 1>& z,
                            const Eigen::Matrix<double, M, 1>& zhat, const Eigen::Matrix<double, M, M>& s,
                            const Eigen::Matrix<double, N, M>& cross, const std::array<bool, M>& angle_mask,
                            bool apply_gate, UpdateReport& report) {
    report.kind = kind;
    Eigen::Matrix<double, M, 1> nu = z - zhat;
    for (int k = 0; k < M; ++k)
      if (angle_mask[k]) nu(k) = wrap_angle(nu(k));
    report.innovation = nu;
    report.innovation_std = s.diagonal().cwiseMax(0.0).cwiseSqrt();
    if (apply_gate) {
      report.gate = gate(nu, s, params_.gate_multiplier);
      if (!report.gate.accepted()) return report;
    }
    const Eigen::LDLT<Eigen::Matrix<double, M, M>> ldlt(s);
    const Eigen::Matrix<double, N, M> gain = ldlt.solve(cross.transpose()).transpose();
    state_.mean += gain * nu;
    for (int i : Model::kAngleIndices) state_.mean(i) = wrap_angle(state_.mean(i));
    state_.cov -= gain * s * gain.transpose();
    symmetrize(state_.cov);
    report.accepted = true;
    return report;
  }

  Model model_;
  FilterState<N> state_;
  Params params_;
  double spread_ = 1.0;
  Eigen::Matrix<double, kNumSigma, 1> wm_;
  Eigen::Matrix<double, kNumSigma, 1> wc_;
  std::size_t jitter_events_ = 0;
};

}  // namespace auvnav
