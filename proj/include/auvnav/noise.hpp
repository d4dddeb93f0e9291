#pragma once

#include <cmath>
#include <random>
#include <stdexcept>

namespace auvnav {

using Rng = std::mt19937_64;

enum class NoiseFamily { Gaussian, LocationScaleT };

/// Gaussian(location, sigma) or location-scale Student-t(location, tau, dof).
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::Gaussian;
  double location = 0.0;
  double scale = 0.0;
  double dof = 2.0;

  static NoiseSpec gaussian(double sigma, double location = 0.0) {
    return {NoiseFamily::Gaussian, location, sigma, 0.0};
  }
  static NoiseSpec student_t(double tau, double dof = 2.0, double location = 0.0) {
    return {NoiseFamily::LocationScaleT, location, tau, dof};
  }

  /// Variance used for filter/solver weighting. For the t family this is tau^2;
  /// with dof <= 2 the true variance does not exist.
  double weighting_variance() const { return scale * scale; }

  void validate() const {
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
      throw std::invalid_argument("NoiseSpec: scale must be finite and non-negative");
    }
    if (family == NoiseFamily::LocationScaleT && !(dof > 0.0)) {
      throw std::invalid_argument("NoiseSpec: dof must be positive for the t family");
    }
  }

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// One draw from the distribution described by `spec`.
///
/// The t family is sampled as Z / sqrt(chi2_nu / nu).
inline double sample_noise(const NoiseSpec& spec, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double z = normal(rng);
  if (spec.family == NoiseFamily::Gaussian) {
    return spec.location + spec.scale * z;
  }
  std::chi_squared_distribution<double> chi2(spec.dof);
  const double w = chi2(rng);
  return spec.location + spec.scale * z / std::sqrt(w / spec.dof);
}

/// Independent generator for a named stream derived from a master seed.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace auvnav
