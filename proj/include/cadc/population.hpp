#pragma once

// Anchor-based Gaussian population. Each anchor owns k primitives whose
// means are the anchor position plus scaled offsets; the offsets are the
// free parameters and the means are derived from them.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace cadc {

struct Anchor {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  std::vector<Eigen::Vector2d> offsets;  ///< one per child, in child order
  double scale_factor = 1.0;
  /// Representative per-axis scale; recomputed by the density policy.
  Eigen::Vector2d scale_vector = Eigen::Vector2d::Zero();
  std::vector<std::size_t> children;  ///< primitive indices, parallel to offsets
};

/// One 2D Gaussian. Shape and opacity are stored unconstrained
/// (log-scales, rotation angle, opacity logit) so any gradient step keeps
/// the covariance positive-definite and the opacity in (0, 1].
struct GaussianPrimitive {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d log_scale = Eigen::Vector2d::Zero();
  double rotation = 0.0;
  double opacity_logit = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double grad_accum = 0.0;
  std::size_t grad_count = 0;
  std::size_t anchor = 0;
  std::size_t slot = 0;  ///< index into the owning anchor's offsets

  double opacity() const {
    if (opacity_logit >= 0.0) return 1.0 / (1.0 + std::exp(-opacity_logit));
    const double e = std::exp(opacity_logit);
    return e / (1.0 + e);
  }

  /// opacity == 1 maps to an infinite logit, which is representable.
  void set_opacity(double alpha) {
    opacity_logit = alpha >= 1.0 ? std::numeric_limits<double>::infinity()
                                 : std::log(alpha / (1.0 - alpha));
  }

  Eigen::Vector2d scales() const { return log_scale.array().exp(); }

  Eigen::Matrix2d rotation_matrix() const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
  }

  /// R * diag(s^2) * R^T
  Eigen::Matrix2d covariance() const {
    const Eigen::Matrix2d r = rotation_matrix();
    return r * scales().array().square().matrix().asDiagonal() * r.transpose();
  }

  /// Mean positional-gradient norm since the last reset.
  double mean_gradient() const {
    return grad_accum / static_cast<double>(grad_count > 0 ? grad_count : 1);
  }
};

struct AnchorPopulation {
  std::vector<Anchor> anchors;
  std::vector<GaussianPrimitive> primitives;

  std::size_t size() const noexcept { return primitives.size(); }
  bool empty() const noexcept { return primitives.empty(); }
};

/// x_v + O_i * l_v. Throws Error(IndexOutOfRange) when i >= k.
Eigen::Vector2d gaussian_mean_from_anchor(const Anchor& anchor, std::size_t i);

/// Recompute every primitive mean from its anchor offset.
void sync_means(AnchorPopulation& pop);

/// Set the anchor offset of every primitive so that its stored mean is
/// reproduced (inverse of sync_means).
void sync_offsets(AnchorPopulation& pop);

/// Throws Error(InvalidConfig) if anchor/child bookkeeping is inconsistent.
void check_population(const AnchorPopulation& pop);

}  // namespace cadc
