#pragma once

// View reliability from match statistics, the pixel drop rate it implies,
// and seeded Bernoulli masks over photometric supervision.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cadc/codec_log.hpp"
#include "cadc/image.hpp"

namespace cadc {

/// Keypoint and inlier counts reported by an external matcher.
struct MatchStats {
  std::size_t frame_index = 0;
  std::size_t keypoints = 0;
  std::size_t inliers = 0;

  bool operator==(const MatchStats&) const = default;
};

struct MaskConfig {
  double eta = 0.5;
  double epsilon = 1e-6;
  std::uint64_t seed_base = 0;
};

void check(const MaskConfig& cfg);

struct MaskPlan {
  std::size_t frame_index = 0;
  double inlier_ratio = 1.0;
  double drop_rate = 0.0;
  std::uint64_t seed = 0;
  Mask mask;

  std::size_t kept() const { return static_cast<std::size_t>(mask.count()); }
};

/// I / (K + eps); 0 when K = 0.
template <typename Scalar>
Scalar inlier_ratio(Scalar inliers, Scalar keypoints, Scalar epsilon) {
  return inliers / (keypoints + epsilon);
}

double inlier_ratio(const MatchStats& stats, double epsilon);

/// eta * (1 - r)
template <typename Scalar>
Scalar drop_rate(Scalar r, Scalar eta) {
  return eta * (Scalar(1) - r);
}

/// Mixes (seed_base, frame, iteration) into one 64-bit mask seed.
std::uint64_t mask_seed(std::uint64_t seed_base, std::uint64_t frame, std::uint64_t iteration);

/// Each pixel is dropped independently with probability `drop`. The bit
/// pattern is a pure function of (width, height, drop, seed).
MaskPlan make_mask(int width, int height, double drop, std::uint64_t seed);

/// Plan for one view: ratio and drop rate from the stats, mask from the
/// per-iteration seed.
MaskPlan plan_mask(const MatchStats& stats, const MaskConfig& cfg, int width, int height,
                   std::uint64_t iteration);

struct MaskedLoss {
  double value = 0.0;
  bool degenerate_mask = false;  ///< every pixel was dropped
};

/// Mean absolute colour difference over kept pixels (averaged over channels).
/// Throws Error(DimensionMismatch).
MaskedLoss masked_photometric_loss(const Image& render, const Image& target, const MaskPlan& plan);

/// JSON array of {frame_index, keypoints, inliers}. Throws ParseError(SchemaError).
std::vector<MatchStats> parse_match_stats_json(std::string_view text);

/// Errors for inliers > keypoints and duplicate frame indices.
ValidationReport validate(const std::vector<MatchStats>& stats);

/// Plain PBM (P1); kept pixels are written as 0 (white), dropped as 1.
std::string to_pbm(const Mask& mask);
void write_pbm(const Mask& mask, const std::filesystem::path& path);

}  // namespace cadc
