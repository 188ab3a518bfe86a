#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "cadc/error.hpp"
#include "cadc/splat_sim.hpp"

namespace cadc {

namespace {

/// Per-primitive quantities shared by every pixel.
struct Splat {
  Eigen::Vector2d mean;
  Eigen::Matrix2d conic;  ///< inverse covariance
  Eigen::Matrix2d rot;
  Eigen::Vector2d inv_var;  ///< 1 / s^2 along the principal axes
  double opacity;
  Eigen::Vector3d color;
};

std::vector<Splat> prepare(const Scene2D& scene) {
  std::vector<Splat> splats;
  splats.reserve(scene.population.size());
  for (std::size_t i = 0; i < scene.population.size(); ++i) {
    const auto& prim = scene.population.primitives[i];
    const Eigen::Vector2d var = prim.scales().array().square();
    if (!(var.minCoeff() > 0.0) || var.maxCoeff() / var.minCoeff() > kMaxCovarianceCondition ||
        !var.allFinite()) {
      throw Error(Errc::SingularCovariance,
                  "primitive " + std::to_string(i) + " has an ill-conditioned covariance");
    }
    Splat s;
    s.mean = prim.mean;
    s.conic = prim.covariance().inverse();
    s.rot = prim.rotation_matrix();
    s.inv_var = var.cwiseInverse();
    s.opacity = prim.opacity();
    s.color = prim.color;
    splats.push_back(s);
  }
  return splats;
}

inline double alpha_at(const Splat& s, const Eigen::Vector2d& p) {
  const Eigen::Vector2d d = p - s.mean;
  return s.opacity * std::exp(-0.5 * d.dot(s.conic * d));
}

}  // namespace

Image render(const Scene2D& scene) {
  const auto splats = prepare(scene);
  Image img(scene.width, scene.height);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      const Eigen::Vector2d p(x, y);
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      double transmittance = 1.0;
      for (const auto& s : splats) {
        const double a = alpha_at(s, p);
        c += (a * transmittance) * s.color;
        transmittance *= 1.0 - a;
      }
      c += transmittance * scene.background;
      img.at(x, y) = c.transpose().array();
    }
  }
  return img;
}

Eigen::VectorXd composite_weights(const Scene2D& scene, const Eigen::Vector2d& p) {
  const auto splats = prepare(scene);
  Eigen::VectorXd w(static_cast<Eigen::Index>(splats.size()) + 1);
  double transmittance = 1.0;
  for (std::size_t i = 0; i < splats.size(); ++i) {
    const double a = alpha_at(splats[i], p);
    w[static_cast<Eigen::Index>(i)] = a * transmittance;
    transmittance *= 1.0 - a;
  }
  w[w.size() - 1] = transmittance;
  return w;
}

LossAndGradients loss_and_gradients(const Scene2D& scene, const Image& target, const Mask& mask) {
  if (target.width != scene.width || target.height != scene.height || mask.rows() != scene.height ||
      mask.cols() != scene.width) {
    throw Error(Errc::DimensionMismatch, "scene, target and mask must share dimensions");
  }
  const auto splats = prepare(scene);
  const std::size_t n = splats.size();
  LossAndGradients out;
  out.gradients.assign(n, PrimitiveGradient{});

  const auto kept = static_cast<double>(mask.count());
  if (kept == 0.0) {
    out.degenerate_mask = true;
    return out;
  }
  const double norm = 1.0 / (3.0 * kept);

  std::vector<double> alpha(n), trans(n);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      if (!mask(y, x)) continue;
      const Eigen::Vector2d p(x, y);

      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      double t = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double a = alpha_at(splats[i], p);
        alpha[i] = a;
        trans[i] = t;
        c += (a * t) * splats[i].color;
        t *= 1.0 - a;
      }
      c += t * scene.background;

      const Eigen::Vector3d residual = c - target.at(x, y).transpose().matrix();
      out.loss += residual.squaredNorm() * norm;
      const Eigen::Vector3d dl_dc = 2.0 * norm * residual;

      // Back to front: `behind` is the colour composited behind primitive i.
      Eigen::Vector3d behind = scene.background;
      for (std::size_t k = n; k-- > 0;) {
        const Splat& s = splats[k];
        const double a = alpha[k];
        auto& g = out.gradients[k];
        g.color += (a * trans[k]) * dl_dc;
        const double dl_da = trans[k] * dl_dc.dot(s.color - behind);
        behind = a * s.color + (1.0 - a) * behind;
        if (a == 0.0) continue;

        const Eigen::Vector2d d = p - s.mean;
        const Eigen::Vector2d e = s.rot.transpose() * d;
        const Eigen::Vector2d we = s.inv_var.cwiseProduct(e);
        g.mean += (dl_da * a) * (s.rot * we);
        g.log_scale += (dl_da * a) * we.cwiseProduct(e);
        g.rotation += -dl_da * a * e[0] * e[1] * (s.inv_var[0] - s.inv_var[1]);
        g.opacity_logit += dl_da * a * (1.0 - s.opacity);
      }
    }
  }
  return out;
}

LossAndGradients loss_and_gradients(const Scene2D& scene, const Image& target, const MaskPlan& plan) {
  return loss_and_gradients(scene, target, plan.mask);
}

// ---------------------------------------------------------------------------
// Degradation
// ---------------------------------------------------------------------------

namespace {

Image blur(const Image& img, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  Eigen::VectorXd kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  kernel /= kernel.sum();

  auto pass = [&](const Image& src, bool horizontal) {
    Image dst(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
      for (int x = 0; x < src.width; ++x) {
        Eigen::Array3d acc = Eigen::Array3d::Zero();
        for (int k = -radius; k <= radius; ++k) {
          const int sx = horizontal ? std::clamp(x + k, 0, src.width - 1) : x;
          const int sy = horizontal ? y : std::clamp(y + k, 0, src.height - 1);
          acc += kernel[k + radius] * src.at(sx, sy).transpose();
        }
        dst.at(x, y) = acc.transpose();
      }
    }
    return dst;
  };
  return pass(pass(img, true), false);
}

}  // namespace

Image degrade_frame(const Image& img, double qp) {
  if (qp <= 22.0) return img;
  Image out = blur(img, (qp - 22.0) / 10.0);
  const double levels = std::max(2.0, std::round(256.0 / std::exp2((qp - 22.0) / 8.0)));
  const double step = levels - 1.0;
  out.pixels = (out.pixels.cwiseMax(0.0).cwiseMin(1.0) * step).round() / step;
  return out;
}

double gradient_energy(const Image& img) {
  double energy = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (x + 1 < img.width) energy += (img.at(x + 1, y) - img.at(x, y)).square().sum();
      if (y + 1 < img.height) energy += (img.at(x, y + 1) - img.at(x, y)).square().sum();
    }
  }
  return energy;
}

}  // namespace cadc
