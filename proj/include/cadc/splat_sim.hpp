#pragma once

// Desk-scale 2D Gaussian splatting: front-to-back compositing, analytic
// gradients of a masked photometric loss, a synthetic degraded sequence,
// and the per-frame optimisation loop that drives the density policy.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cadc/codec_log.hpp"
#include "cadc/confidence.hpp"
#include "cadc/density_control.hpp"
#include "cadc/image.hpp"
#include "cadc/population.hpp"
#include "cadc/quality_mask.hpp"

namespace cadc {

/// Primitive order is depth order: index 0 is in front.
struct Scene2D {
  AnchorPopulation population;
  int width = 64;
  int height = 64;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
};

/// Covariances whose condition number exceeds this are rejected.
inline constexpr double kMaxCovarianceCondition = 1e8;

/// Pixel (x, y) samples the scene at the point (x, y).
Image render(const Scene2D& scene);

/// Blend weight of every primitive at `p` followed by the residual
/// transmittance that reaches the background (size N + 1).
Eigen::VectorXd composite_weights(const Scene2D& scene, const Eigen::Vector2d& p);

/// Per-primitive loss derivatives. `opacity_logit` is the derivative with
/// respect to the sigmoid pre-activation.
struct PrimitiveGradient {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d log_scale = Eigen::Vector2d::Zero();
  double rotation = 0.0;
  double opacity_logit = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

struct LossAndGradients {
  double loss = 0.0;
  std::vector<PrimitiveGradient> gradients;
  bool degenerate_mask = false;
};

/// Mean squared colour error over kept pixels (and channels), with exact
/// derivatives of the composited image. An all-dropped mask gives loss 0
/// and zero gradients.
LossAndGradients loss_and_gradients(const Scene2D& scene, const Image& target, const Mask& mask);
LossAndGradients loss_and_gradients(const Scene2D& scene, const Image& target, const MaskPlan& plan);

/// Codec-loss proxy: Gaussian blur with sigma = (qp - 22) / 10 pixels, then
/// uniform quantisation to round(256 / 2^((qp - 22) / 8)) levels. Identity
/// for qp <= 22.
Image degrade_frame(const Image& img, double qp);

/// Sum of squared forward differences over all channels.
double gradient_energy(const Image& img);

// ---------------------------------------------------------------------------
// Synthetic sequences
// ---------------------------------------------------------------------------

struct SyntheticConfig {
  int width = 64;
  int height = 64;
  std::size_t frames = 8;
  std::size_t gop = 4;
  double i_frame_qp = 27.0;
  double base_qp = 37.0;
  double qp_ramp = 10.0;  ///< QP climbs from base to base + ramp across a GOP
  double pan_per_frame = 0.75;  ///< horizontal camera motion in pixels
  double bits_per_energy = 2000.0;
  std::size_t keypoints = 1000;
  double gap_scale_db = 6.0;  ///< PSNR jump that costs a factor e of inliers
};

/// GOP sawtooth: I-frames at `i_frame_qp`, other frames climbing linearly
/// from `base_qp` to `base_qp + qp_ramp` by the end of the GOP.
std::vector<double> sawtooth_qp_schedule(std::size_t frames, std::size_t gop, double i_frame_qp,
                                         double base_qp, double qp_ramp);

FrameType sawtooth_frame_type(std::size_t t, std::size_t gop);

/// Log whose bits follow the gradient energy of each degraded frame.
FrameLogSeries synthesize_log(const std::vector<Image>& degraded, const std::vector<double>& qp,
                              std::size_t gop, double bits_per_energy);

struct SyntheticSequence {
  std::vector<Image> ground_truth;
  std::vector<Image> degraded;
  std::vector<double> qp_schedule;
  FrameLogSeries log;
  std::vector<MatchStats> match_stats;
};

/// Procedural panning scene, degraded per the sawtooth schedule.
SyntheticSequence make_synthetic_sequence(const SyntheticConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

struct LearningRates {
  double mean = 0.05;
  double scale = 0.01;
  double rotation = 0.01;
  double opacity = 0.05;
  double color = 0.01;
};

struct ExperimentConfig {
  std::size_t iterations_per_frame = 200;
  std::size_t densify_interval = 50;
  LearningRates lr;
  double grid_pitch = 8.0;
  double initial_opacity = 0.5;
  DensityPolicyConfig policy;
  MaskConfig mask;
  ScoringConfig scoring;
  std::uint64_t seed = 0;
};

void check(const ExperimentConfig& cfg);

/// Primitives on a regular grid with isotropic covariance equal to the
/// pitch (in px^2); every 2x2 block of grid points forms one anchor.
Scene2D initialize_scene(const Image& first_frame, double grid_pitch, double initial_opacity);

struct FrameSummary {
  std::size_t frame = 0;
  double qp = 0.0;
  double q = 0.0;
  double q_bar = 0.0;
  double theta = 0.0;
  double omega_prime = 0.0;
  double drop_rate = 0.0;
  double input_psnr = 0.0;  ///< degraded frame vs ground truth
  double fit_psnr = 0.0;    ///< render at the end of the frame vs ground truth
  std::size_t primitives = 0;
  std::size_t densified = 0;
  std::size_t pruned_opacity = 0;
  std::size_t pruned_scale = 0;
};

struct PolicyEvent {
  std::size_t frame = 0;
  std::size_t iteration = 0;
  double theta = 0.0;
  double omega_prime = 0.0;
  std::size_t size_before = 0;
  std::size_t size_after = 0;
  std::size_t densified = 0;
  std::size_t pruned_opacity = 0;
  std::size_t pruned_scale = 0;
};

struct ExperimentReport {
  std::vector<FrameSummary> frames;
  std::vector<PolicyEvent> events;
  std::vector<double> loss_trace;  ///< one entry per optimisation step
  std::vector<std::size_t> population_trace;  ///< size after every step
  std::vector<std::string> warnings;
  std::vector<DensityUpdate> updates;
  std::vector<Image> snapshots;  ///< render at the end of every frame
};

/// Runs the whole sequence. Throws Error(PolicyCollapse) if pruning empties
/// the population.
ExperimentReport run_experiment(const SyntheticSequence& seq, const ExperimentConfig& cfg);

std::string to_json(const ExperimentReport& report);

/// Columns frame,q,q_bar,theta,omega_prime.
std::string thresholds_csv(const ExperimentReport& report);

/// Every FrameSummary field, one row per frame.
std::string frames_csv(const ExperimentReport& report);

}  // namespace cadc
