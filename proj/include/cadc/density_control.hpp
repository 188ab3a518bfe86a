#pragma once

// Densification and pruning policy: the base gradient/opacity rule, its
// exponential and linear confidence modulations, and scale-based pruning
// driven by normalised anchor scales.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cadc/confidence.hpp"
#include "cadc/population.hpp"

namespace cadc {

enum class Modulation { Fixed, Exponential, LinearVariant };

/// How the representative anchor scale is built. OffsetMean averages the
/// absolute child offsets (times the scale factor); CovarianceScale averages
/// the child standard deviations.
enum class ScaleSource { OffsetMean, CovarianceScale };

struct DensityPolicyConfig {
  double theta0 = 2e-5;
  double omega0 = 0.005;
  Modulation modulation = Modulation::Exponential;
  double alpha_lin = 1.0;
  bool scale_pruning = true;
  ScaleSource scale_source = ScaleSource::OffsetMean;
  /// Densification stops once the population reaches this size; 0 = no cap.
  std::size_t max_primitives = 0;
};

void check(const DensityPolicyConfig& cfg);

inline constexpr double kMinTheta = 1e-8;
inline constexpr double kMinLinearFactor = 0.05;

enum class Decision { Densify, Prune, Keep };
enum class PruneReason { Opacity, Scale };

const char* to_string(Decision d) noexcept;
const char* to_string(PruneReason r) noexcept;

struct Thresholds {
  double theta;
  double omega;
};

// ---------------------------------------------------------------------------
// Threshold kernels
// ---------------------------------------------------------------------------

/// Densify when g > theta; otherwise prune when alpha < omega. Ties keep.
template <typename Scalar>
Decision base_decision(Scalar g, Scalar alpha, Scalar theta, Scalar omega) {
  if (g > theta) return Decision::Densify;
  if (alpha < omega) return Decision::Prune;
  return Decision::Keep;
}

template <typename Scalar>
Scalar clamp_omega(Scalar omega) {
  return std::clamp(omega, std::numeric_limits<Scalar>::min(), Scalar(1));
}

/// omega0 * exp(q_bar * u_tilde), clamped to (0, 1].
template <typename Scalar>
Scalar scale_prune_threshold(Scalar q_bar, Scalar u_tilde, Scalar omega0) {
  return clamp_omega(omega0 * std::exp(q_bar * u_tilde));
}

/// True when the unclamped scale threshold would exceed 1.
template <typename Scalar>
bool scale_threshold_overflows(Scalar q_bar, Scalar u_tilde, Scalar omega0) {
  return omega0 * std::exp(q_bar * u_tilde) > Scalar(1);
}

/// (theta0, omega0) * exp(q_bar - q), with theta floored and omega clamped.
template <typename Scalar>
Thresholds adaptive_thresholds(Scalar q, Scalar q_bar, Scalar theta0, Scalar omega0) {
  const Scalar factor = std::exp(q_bar - q);
  return {std::max<double>(theta0 * factor, kMinTheta), clamp_omega<double>(omega0 * factor)};
}

/// (theta0, omega0) * (1 + alpha * (q_bar - q)), factor floored at 0.05.
template <typename Scalar>
Thresholds linear_variant_thresholds(Scalar q, Scalar q_bar, Scalar theta0, Scalar omega0,
                                     Scalar alpha_lin) {
  const Scalar factor = std::max<Scalar>(Scalar(1) + alpha_lin * (q_bar - q), kMinLinearFactor);
  return {std::max<double>(theta0 * factor, kMinTheta), clamp_omega<double>(omega0 * factor)};
}

/// Frame thresholds under the configured modulation.
Thresholds frame_thresholds(double q, double q_bar, const DensityPolicyConfig& cfg);

// ---------------------------------------------------------------------------
// Anchor scales
// ---------------------------------------------------------------------------

/// Representative scale vector of one anchor.
Eigen::Vector2d anchor_scale_vector(const Anchor& anchor, const AnchorPopulation& pop,
                                    ScaleSource source);

/// Writes scale_vector of every anchor.
void refresh_scale_vectors(AnchorPopulation& pop, ScaleSource source);

/// Median with the mean-of-middle-two rule for even counts.
double median(std::vector<double> values);

/// U_v / median(U) where U_v = ||scale_vector||_2. Throws Error(AllZeroScales)
/// when the median is zero and Error(EmptySeries) for no anchors.
Eigen::VectorXd anchor_scale_norm(const std::vector<Anchor>& anchors);

// ---------------------------------------------------------------------------
// Policy application
// ---------------------------------------------------------------------------

struct DensifiedPrimitive {
  std::size_t parent;  ///< index before the update
  std::size_t index;   ///< index after the update
  Eigen::Vector2d mean;
};

struct PrunedPrimitive {
  std::size_t index;  ///< index before the update
  PruneReason reason;
};

struct ThresholdsUsed {
  double q = 0.0;
  double q_bar = 0.0;
  double theta = 0.0;
  double omega_prime = 0.0;
  std::vector<double> omega_scale;  ///< per anchor, empty without scale pruning
};

struct DensityUpdate {
  std::vector<DensifiedPrimitive> densified;
  std::vector<PrunedPrimitive> pruned;
  ThresholdsUsed thresholds;
  std::vector<std::string> warnings;
  std::size_t size_before = 0;
  std::size_t size_after = 0;
  /// For every post-update primitive, its pre-update index or -1 if new.
  std::vector<std::ptrdiff_t> source_index;
};

/// Decide every primitive and rewrite the population in place.
///
/// Survivors keep their relative order; clones are appended after them in
/// parent order. Opacity pruning uses the modulated omega'; with scale
/// pruning enabled a primitive is also pruned (reason Scale) when its
/// opacity is below its anchor's scale threshold, which overrides Densify.
/// Densified parents and their clones restart gradient accumulation, and
/// anchors left without children are removed.
DensityUpdate apply_policy(AnchorPopulation& pop, double q, double q_bar,
                           const DensityPolicyConfig& cfg);

DensityUpdate apply_policy(AnchorPopulation& pop, const ConfidenceSeries& conf, Eigen::Index t,
                           const DensityPolicyConfig& cfg);

std::string to_json(const DensityUpdate& update);

}  // namespace cadc
