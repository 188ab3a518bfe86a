#include "cadc/quality_mask.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cadc/error.hpp"

namespace cadc {

void check(const MaskConfig& cfg) {
  if (!(cfg.eta >= 0.0 && cfg.eta <= 1.0)) throw Error(Errc::InvalidConfig, "eta must lie in [0, 1]");
  if (!(cfg.epsilon > 0.0)) throw Error(Errc::InvalidConfig, "epsilon must be positive");
}

double inlier_ratio(const MatchStats& stats, double epsilon) {
  return inlier_ratio(static_cast<double>(stats.inliers), static_cast<double>(stats.keypoints), epsilon);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ParseError(Errc::SchemaError, path + ": " + msg, std::nullopt, path);
}

}  // namespace

std::uint64_t mask_seed(std::uint64_t seed_base, std::uint64_t frame, std::uint64_t iteration) {
  return splitmix64(splitmix64(splitmix64(seed_base) ^ frame) ^ iteration);
}

MaskPlan make_mask(int width, int height, double drop, std::uint64_t seed) {
  if (width < 1 || height < 1) throw Error(Errc::DimensionMismatch, "mask needs width, height >= 1");
  if (!(drop >= 0.0 && drop <= 1.0)) throw Error(Errc::InvalidConfig, "drop rate must lie in [0, 1]");
  MaskPlan plan;
  plan.drop_rate = drop;
  plan.inlier_ratio = 1.0;
  plan.seed = seed;
  plan.mask.resize(height, width);
  // mt19937_64 output is fully specified by the standard; the uniform
  // mapping is done by hand so the pattern does not depend on the library.
  std::mt19937_64 rng(seed);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      plan.mask(y, x) = u >= drop;
    }
  }
  return plan;
}

MaskPlan plan_mask(const MatchStats& stats, const MaskConfig& cfg, int width, int height,
                   std::uint64_t iteration) {
  const double r = inlier_ratio(stats, cfg.epsilon);
  const double d = std::clamp(drop_rate(r, cfg.eta), 0.0, 1.0);
  MaskPlan plan = make_mask(width, height, d, mask_seed(cfg.seed_base, stats.frame_index, iteration));
  plan.frame_index = stats.frame_index;
  plan.inlier_ratio = r;
  return plan;
}

MaskedLoss masked_photometric_loss(const Image& render, const Image& target, const MaskPlan& plan) {
  if (!render.same_shape(target) || plan.mask.rows() != render.height ||
      plan.mask.cols() != render.width) {
    throw Error(Errc::DimensionMismatch, "render, target and mask must share dimensions");
  }
  double sum = 0.0;
  std::size_t kept = 0;
  for (int y = 0; y < render.height; ++y) {
    for (int x = 0; x < render.width; ++x) {
      if (!plan.mask(y, x)) continue;
      sum += (render.at(x, y) - target.at(x, y)).abs().sum() / 3.0;
      ++kept;
    }
  }
  if (kept == 0) return {0.0, true};
  return {sum / static_cast<double>(kept), false};
}

std::vector<MatchStats> parse_match_stats_json(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail("", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) fail("", "expected an array of match statistics");
  std::vector<MatchStats> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& obj = doc[i];
    const std::string base = "/" + std::to_string(i);
    if (!obj.is_object()) fail(base, "expected an object");
    MatchStats s;
    for (const auto& [key, field] : {std::pair{"frame_index", &s.frame_index},
                                     std::pair{"keypoints", &s.keypoints},
                                     std::pair{"inliers", &s.inliers}}) {
      if (!obj.contains(key)) fail(base + "/" + key, "required key missing");
      if (!obj[key].is_number_unsigned()) fail(base + "/" + key, "expected a non-negative integer");
      *field = obj[key].get<std::size_t>();
    }
    for (const auto& [key, value] : obj.items()) {
      if (key != "frame_index" && key != "keypoints" && key != "inliers") {
        fail(base + "/" + key, "unknown key");
      }
    }
    out.push_back(s);
  }
  return out;
}

ValidationReport validate(const std::vector<MatchStats>& stats) {
  ValidationReport report;
  std::map<std::size_t, std::size_t> seen;
  for (std::size_t row = 0; row < stats.size(); ++row) {
    const auto& s = stats[row];
    if (s.inliers > s.keypoints) {
      report.errors.push_back({row, "inliers", "inliers (" + std::to_string(s.inliers) +
                                                   ") exceed keypoints (" +
                                                   std::to_string(s.keypoints) + ")"});
    }
    if (!seen.emplace(s.frame_index, row).second) {
      report.errors.push_back({row, "frame_index", "duplicate frame_index " + std::to_string(s.frame_index)});
    }
  }
  return report;
}

std::string to_pbm(const Mask& mask) {
  std::ostringstream os;
  os << "P1\n" << mask.cols() << ' ' << mask.rows() << '\n';
  for (Eigen::Index y = 0; y < mask.rows(); ++y) {
    for (Eigen::Index x = 0; x < mask.cols(); ++x) {
      os << (mask(y, x) ? '0' : '1') << (x + 1 < mask.cols() ? " " : "");
    }
    os << '\n';
  }
  return os.str();
}

void write_pbm(const Mask& mask, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot open '" + path.string() + "' for writing");
  out << to_pbm(mask);
}

}  // namespace cadc
