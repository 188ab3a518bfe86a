#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cadc/error.hpp"
#include "cadc/format.hpp"
#include "cadc/splat_sim.hpp"

namespace cadc {

// ---------------------------------------------------------------------------
// Synthetic sequences
// ---------------------------------------------------------------------------

std::vector<double> sawtooth_qp_schedule(std::size_t frames, std::size_t gop, double i_frame_qp,
                                         double base_qp, double qp_ramp) {
  if (gop == 0) throw Error(Errc::InvalidConfig, "gop must be positive");
  std::vector<double> qp(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t pos = t % gop;
    qp[t] = pos == 0 ? i_frame_qp
                     : base_qp + qp_ramp * static_cast<double>(pos) / static_cast<double>(std::max<std::size_t>(gop - 1, 1));
  }
  return qp;
}

FrameType sawtooth_frame_type(std::size_t t, std::size_t gop) {
  const std::size_t pos = t % gop;
  if (pos == 0) return FrameType::I;
  if (pos == gop - 1 || pos % 8 == 0) return FrameType::P;
  return FrameType::B;
}

FrameLogSeries synthesize_log(const std::vector<Image>& degraded, const std::vector<double>& qp,
                              std::size_t gop, double bits_per_energy) {
  if (degraded.size() != qp.size()) {
    throw Error(Errc::LengthMismatch, "one QP value is needed per degraded frame");
  }
  FrameLogSeries log;
  log.source = LogSource::Synthetic;
  for (std::size_t t = 0; t < degraded.size(); ++t) {
    FrameRecord rec;
    rec.display_index = t;
    rec.encode_order = t;
    rec.frame_type = sawtooth_frame_type(t, gop);
    rec.qp = qp[t];
    rec.bits = std::max(1.0, std::round(bits_per_energy * gradient_energy(degraded[t])));
    rec.gop_position = t % gop;
    log.records.push_back(std::move(rec));
  }
  return log;
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

struct Ellipse {
  Eigen::Vector2d center;
  Eigen::Vector2d radii;
  double angle;
  Eigen::Array3d color;
};

struct ProceduralScene {
  Eigen::Array3d top, bottom;
  std::vector<Ellipse> ellipses;
  Eigen::Vector4d stripes;  // x0, y0, x1, y1
  Eigen::Array3d stripe_color;
};

ProceduralScene make_procedural_scene(int width, int height, std::mt19937_64& rng) {
  ProceduralScene s;
  auto color = [&] { return Eigen::Array3d(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9)); };
  s.top = color();
  s.bottom = color();
  for (int i = 0; i < 6; ++i) {
    Ellipse e;
    e.center = {uniform(rng, 0.0, width), uniform(rng, 0.0, height)};
    e.radii = {uniform(rng, 5.0, 14.0), uniform(rng, 4.0, 10.0)};
    e.angle = uniform(rng, 0.0, 3.14159265358979);
    e.color = color();
    s.ellipses.push_back(e);
  }
  const double x0 = uniform(rng, 0.1, 0.5) * width;
  const double y0 = uniform(rng, 0.1, 0.5) * height;
  s.stripes = {x0, y0, x0 + 0.35 * width, y0 + 0.3 * height};
  s.stripe_color = color();
  return s;
}

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

Eigen::Array3d sample(const ProceduralScene& s, double u, double v, int height) {
  const double h = std::clamp(v / height, 0.0, 1.0);
  Eigen::Array3d c = (1.0 - h) * s.top + h * s.bottom;
  for (const auto& e : s.ellipses) {
    const double cs = std::cos(e.angle), sn = std::sin(e.angle);
    const double dx = u - e.center.x(), dy = v - e.center.y();
    const double lx = (cs * dx + sn * dy) / e.radii.x();
    const double ly = (-sn * dx + cs * dy) / e.radii.y();
    const double r = std::sqrt(lx * lx + ly * ly);
    const double cover = 1.0 - smoothstep(1.0 - 0.08, 1.0 + 0.08, r);
    c = (1.0 - cover) * c + cover * e.color;
  }
  if (u >= s.stripes[0] && u <= s.stripes[2] && v >= s.stripes[1] && v <= s.stripes[3]) {
    const double wave = 0.5 + 0.5 * std::sin(2.0 * 3.14159265358979 * u / 4.0);
    c = (1.0 - wave) * c + wave * s.stripe_color;
  }
  return c;
}

}  // namespace

SyntheticSequence make_synthetic_sequence(const SyntheticConfig& cfg, std::uint64_t seed) {
  if (cfg.width < 8 || cfg.height < 8) throw Error(Errc::InvalidConfig, "canvas must be at least 8x8");
  if (cfg.frames == 0) throw Error(Errc::InvalidConfig, "sequence needs at least one frame");
  std::mt19937_64 rng(seed);
  const ProceduralScene scene = make_procedural_scene(cfg.width, cfg.height, rng);

  SyntheticSequence seq;
  seq.qp_schedule = sawtooth_qp_schedule(cfg.frames, cfg.gop, cfg.i_frame_qp, cfg.base_qp, cfg.qp_ramp);
  double previous_psnr = 0.0;
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    Image gt(cfg.width, cfg.height);
    const double pan = cfg.pan_per_frame * static_cast<double>(t);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) gt.at(x, y) = sample(scene, x + pan, y, cfg.height).transpose();
    }
    Image degraded = degrade_frame(gt, seq.qp_schedule[t]);

    // Matches thin out on poor frames and inliers drop across quality jumps.
    const double quality = std::min(psnr(degraded, gt), 60.0);
    const double gap = t == 0 ? 0.0 : std::abs(quality - previous_psnr);
    previous_psnr = quality;
    MatchStats stats;
    stats.frame_index = t;
    stats.keypoints = static_cast<std::size_t>(std::lround(
        static_cast<double>(cfg.keypoints) * std::clamp((quality - 10.0) / 30.0, 0.1, 1.0)));
    stats.inliers = static_cast<std::size_t>(
        std::lround(static_cast<double>(stats.keypoints) * std::exp(-gap / cfg.gap_scale_db)));
    seq.match_stats.push_back(stats);

    seq.ground_truth.push_back(std::move(gt));
    seq.degraded.push_back(std::move(degraded));
  }
  seq.log = synthesize_log(seq.degraded, seq.qp_schedule, cfg.gop, cfg.bits_per_energy);
  return seq;
}

// ---------------------------------------------------------------------------
// Scene initialisation
// ---------------------------------------------------------------------------

void check(const ExperimentConfig& cfg) {
  const auto& lr = cfg.lr;
  if (!(lr.mean > 0 && lr.scale > 0 && lr.rotation > 0 && lr.opacity > 0 && lr.color > 0)) {
    throw Error(Errc::InvalidConfig, "learning rates must be positive");
  }
  if (cfg.iterations_per_frame == 0) throw Error(Errc::InvalidConfig, "iterations_per_frame must be >= 1");
  if (cfg.densify_interval == 0) throw Error(Errc::InvalidConfig, "densify_interval must be >= 1");
  if (!(cfg.grid_pitch >= 1.0)) throw Error(Errc::InvalidConfig, "grid_pitch must be >= 1");
  if (!(cfg.initial_opacity > 0.0 && cfg.initial_opacity < 1.0)) {
    throw Error(Errc::InvalidConfig, "initial_opacity must lie in (0, 1)");
  }
  check(cfg.policy);
  check(cfg.mask);
  check(cfg.scoring);
}

Scene2D initialize_scene(const Image& first_frame, double grid_pitch, double initial_opacity) {
  Scene2D scene;
  scene.width = first_frame.width;
  scene.height = first_frame.height;
  scene.background = first_frame.pixels.colwise().mean().transpose().matrix();

  const int nx = std::max(1, static_cast<int>(scene.width / grid_pitch));
  const int ny = std::max(1, static_cast<int>(scene.height / grid_pitch));
  const int ax = (nx + 1) / 2;
  const int ay = (ny + 1) / 2;
  auto& pop = scene.population;
  pop.anchors.resize(static_cast<std::size_t>(ax * ay));

  std::vector<std::vector<Eigen::Vector2d>> points(pop.anchors.size());
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Eigen::Vector2d p((i + 0.5) * grid_pitch, (j + 0.5) * grid_pitch);
      points[static_cast<std::size_t>((j / 2) * ax + i / 2)].push_back(p);
    }
  }
  for (std::size_t v = 0; v < pop.anchors.size(); ++v) {
    auto& anchor = pop.anchors[v];
    Eigen::Vector2d centre = Eigen::Vector2d::Zero();
    for (const auto& p : points[v]) centre += p;
    anchor.position = centre / static_cast<double>(points[v].size());
    anchor.scale_factor = grid_pitch;
    for (const auto& p : points[v]) {
      GaussianPrimitive prim;
      prim.mean = p;
      prim.log_scale.setConstant(0.5 * std::log(grid_pitch));
      prim.set_opacity(initial_opacity);
      const int px = std::clamp(static_cast<int>(std::lround(p.x())), 0, scene.width - 1);
      const int py = std::clamp(static_cast<int>(std::lround(p.y())), 0, scene.height - 1);
      prim.color = first_frame.at(px, py).transpose().matrix();
      prim.anchor = v;
      prim.slot = anchor.offsets.size();
      anchor.children.push_back(pop.primitives.size());
      anchor.offsets.push_back((p - anchor.position) / anchor.scale_factor);
      pop.primitives.push_back(prim);
    }
  }
  sync_means(pop);
  return scene;
}

// ---------------------------------------------------------------------------
// Optimisation loop
// ---------------------------------------------------------------------------

namespace {

constexpr int kParams = 9;
using ParamVector = Eigen::Matrix<double, kParams, 1>;

struct AdamState {
  ParamVector m = ParamVector::Zero();
  ParamVector v = ParamVector::Zero();
};

ParamVector pack_gradient(const PrimitiveGradient& g, double scale_factor) {
  ParamVector out;
  out << scale_factor * g.mean, g.log_scale, g.rotation, g.opacity_logit, g.color;
  return out;
}

ParamVector learning_rates(const LearningRates& lr) {
  ParamVector out;
  out << lr.mean, lr.mean, lr.scale, lr.scale, lr.rotation, lr.opacity, lr.color, lr.color, lr.color;
  return out;
}

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;
constexpr double kMinScale = 0.3;

void adam_step(Scene2D& scene, std::vector<AdamState>& state, const LossAndGradients& lg,
               const ParamVector& lr, std::size_t step) {
  auto& pop = scene.population;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
  const double log_min = std::log(kMinScale);
  const double log_max = std::log(static_cast<double>(std::max(scene.width, scene.height)));
  for (std::size_t i = 0; i < pop.size(); ++i) {
    auto& prim = pop.primitives[i];
    auto& anchor = pop.anchors[prim.anchor];
    const ParamVector g = pack_gradient(lg.gradients[i], anchor.scale_factor);
    auto& s = state[i];
    s.m = kBeta1 * s.m + (1.0 - kBeta1) * g;
    s.v = kBeta2 * s.v + (1.0 - kBeta2) * g.cwiseAbs2();
    const ParamVector delta =
        (lr.array() * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + kAdamEps)).matrix();

    anchor.offsets[prim.slot] -= delta.segment<2>(0);
    prim.log_scale = (prim.log_scale - delta.segment<2>(2)).cwiseMax(log_min).cwiseMin(log_max);
    prim.rotation -= delta[4];
    prim.opacity_logit = std::clamp(prim.opacity_logit - delta[5], -20.0, 20.0);
    prim.color = (prim.color - delta.segment<3>(6)).cwiseMax(0.0).cwiseMin(1.0);
  }
  sync_means(pop);
}

}  // namespace

ExperimentReport run_experiment(const SyntheticSequence& seq, const ExperimentConfig& cfg) {
  check(cfg);
  const std::size_t frames = seq.degraded.size();
  if (frames == 0 || seq.ground_truth.size() != frames || seq.log.size() != frames ||
      seq.match_stats.size() != frames) {
    throw Error(Errc::LengthMismatch, "sequence components must have equal, non-zero length");
  }
  const ConfidenceSeries conf = score_sequence(seq.log, cfg.scoring);
  MaskConfig mask_cfg = cfg.mask;
  mask_cfg.seed_base = cfg.seed;

  Scene2D scene = initialize_scene(seq.degraded.front(), cfg.grid_pitch, cfg.initial_opacity);
  std::vector<AdamState> state(scene.population.size());
  const ParamVector lr = learning_rates(cfg.lr);
  std::size_t step = 0;
  std::size_t degenerate = 0;

  ExperimentReport report;
  for (std::size_t t = 0; t < frames; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const Thresholds th = frame_thresholds(conf.q[ti], conf.q_bar[ti], cfg.policy);
    FrameSummary summary;
    summary.frame = t;
    summary.qp = seq.log.records[t].qp;
    summary.q = conf.q[ti];
    summary.q_bar = conf.q_bar[ti];
    summary.theta = th.theta;
    summary.omega_prime = th.omega;
    summary.input_psnr = psnr(seq.degraded[t], seq.ground_truth[t]);

    for (std::size_t it = 0; it < cfg.iterations_per_frame; ++it) {
      const MaskPlan plan = plan_mask(seq.match_stats[t], mask_cfg, scene.width, scene.height, it);
      summary.drop_rate = plan.drop_rate;
      const LossAndGradients lg = loss_and_gradients(scene, seq.degraded[t], plan);
      if (lg.degenerate_mask) ++degenerate;
      for (std::size_t i = 0; i < scene.population.size(); ++i) {
        auto& prim = scene.population.primitives[i];
        prim.grad_accum += lg.gradients[i].mean.norm();
        prim.grad_count += 1;
      }
      adam_step(scene, state, lg, lr, ++step);
      report.loss_trace.push_back(lg.loss);

      if ((it + 1) % cfg.densify_interval == 0) {
        DensityUpdate update = apply_policy(scene.population, conf.q[ti], conf.q_bar[ti], cfg.policy);
        std::vector<AdamState> next(scene.population.size());
        for (std::size_t i = 0; i < next.size(); ++i) {
          if (update.source_index[i] >= 0) next[i] = state[static_cast<std::size_t>(update.source_index[i])];
        }
        state = std::move(next);
        for (auto& prim : scene.population.primitives) {
          prim.grad_accum = 0.0;
          prim.grad_count = 0;
        }

        PolicyEvent event;
        event.frame = t;
        event.iteration = it;
        event.theta = update.thresholds.theta;
        event.omega_prime = update.thresholds.omega_prime;
        event.size_before = update.size_before;
        event.size_after = update.size_after;
        event.densified = update.densified.size();
        for (const auto& p : update.pruned) {
          (p.reason == PruneReason::Opacity ? event.pruned_opacity : event.pruned_scale) += 1;
        }
        summary.densified += event.densified;
        summary.pruned_opacity += event.pruned_opacity;
        summary.pruned_scale += event.pruned_scale;
        if (!update.warnings.empty()) {
          report.warnings.push_back("frame " + std::to_string(t) + " iteration " + std::to_string(it) +
                                    ": " + std::to_string(update.warnings.size()) + " warning(s), first: " +
                                    update.warnings.front());
        }
        report.events.push_back(event);
        report.updates.push_back(std::move(update));
        if (scene.population.empty()) {
          throw Error(Errc::PolicyCollapse, "population emptied at frame " + std::to_string(t) +
                                                ", iteration " + std::to_string(it));
        }
      }
      report.population_trace.push_back(scene.population.size());
    }

    Image snapshot = render(scene);
    summary.fit_psnr = psnr(snapshot, seq.ground_truth[t]);
    summary.primitives = scene.population.size();
    report.frames.push_back(summary);
    report.snapshots.push_back(std::move(snapshot));
  }
  if (degenerate > 0) {
    report.warnings.push_back("DegenerateMask: " + std::to_string(degenerate) +
                              " step(s) dropped every pixel");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

std::string to_json(const ExperimentReport& report) {
  using nlohmann::json;
  json j;
  auto& frames = j["frames"] = json::array();
  std::size_t densified = 0, pruned_opacity = 0, pruned_scale = 0;
  for (const auto& f : report.frames) {
    frames.push_back({{"frame", f.frame},
                      {"qp", f.qp},
                      {"q", f.q},
                      {"q_bar", f.q_bar},
                      {"theta", f.theta},
                      {"omega_prime", f.omega_prime},
                      {"drop_rate", f.drop_rate},
                      {"input_psnr", f.input_psnr},
                      {"fit_psnr", f.fit_psnr},
                      {"primitives", f.primitives},
                      {"densified", f.densified},
                      {"pruned_opacity", f.pruned_opacity},
                      {"pruned_scale", f.pruned_scale}});
    densified += f.densified;
    pruned_opacity += f.pruned_opacity;
    pruned_scale += f.pruned_scale;
  }
  j["totals"] = {{"densified", densified}, {"pruned_opacity", pruned_opacity}, {"pruned_scale", pruned_scale}};
  auto& events = j["events"] = json::array();
  for (const auto& e : report.events) {
    events.push_back({{"frame", e.frame},
                      {"iteration", e.iteration},
                      {"theta", e.theta},
                      {"omega_prime", e.omega_prime},
                      {"size_before", e.size_before},
                      {"size_after", e.size_after},
                      {"densified", e.densified},
                      {"pruned_opacity", e.pruned_opacity},
                      {"pruned_scale", e.pruned_scale}});
  }
  j["loss_trace"] = report.loss_trace;
  j["population_trace"] = report.population_trace;
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

std::string thresholds_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "frame,q,q_bar,theta,omega_prime\n";
  for (const auto& f : report.frames) {
    os << f.frame << ',' << format_double(f.q) << ',' << format_double(f.q_bar) << ','
       << format_double(f.theta) << ',' << format_double(f.omega_prime) << '\n';
  }
  return os.str();
}

std::string frames_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "frame,qp,q,q_bar,theta,omega_prime,drop_rate,input_psnr,fit_psnr,primitives,densified,"
        "pruned_opacity,pruned_scale\n";
  for (const auto& f : report.frames) {
    os << f.frame << ',' << format_double(f.qp) << ',' << format_double(f.q) << ','
       << format_double(f.q_bar) << ',' << format_double(f.theta) << ','
       << format_double(f.omega_prime) << ',' << format_double(f.drop_rate) << ','
       << format_double(f.input_psnr) << ',' << format_double(f.fit_psnr) << ',' << f.primitives
       << ',' << f.densified << ',' << f.pruned_opacity << ',' << f.pruned_scale << '\n';
  }
  return os.str();
}

}  // namespace cadc
