#include "cadc/density_control.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "cadc/error.hpp"
#include "cadc/format.hpp"

namespace cadc {

const char* to_string(Decision d) noexcept {
  switch (d) {
    case Decision::Densify: return "Densify";
    case Decision::Prune: return "Prune";
    case Decision::Keep: return "Keep";
  }
  return "?";
}

const char* to_string(PruneReason r) noexcept {
  return r == PruneReason::Opacity ? "Opacity" : "Scale";
}

void check(const DensityPolicyConfig& cfg) {
  if (!(cfg.theta0 > 0.0)) throw Error(Errc::InvalidConfig, "theta0 must be positive");
  if (!(cfg.omega0 > 0.0 && cfg.omega0 < 1.0)) {
    throw Error(Errc::InvalidConfig, "omega0 must lie in (0, 1)");
  }
  if (!std::isfinite(cfg.alpha_lin)) throw Error(Errc::InvalidConfig, "alpha_lin must be finite");
}

Thresholds frame_thresholds(double q, double q_bar, const DensityPolicyConfig& cfg) {
  switch (cfg.modulation) {
    case Modulation::Fixed: return {cfg.theta0, cfg.omega0};
    case Modulation::Exponential: return adaptive_thresholds(q, q_bar, cfg.theta0, cfg.omega0);
    case Modulation::LinearVariant:
      return linear_variant_thresholds(q, q_bar, cfg.theta0, cfg.omega0, cfg.alpha_lin);
  }
  return {cfg.theta0, cfg.omega0};
}

// ---------------------------------------------------------------------------
// Anchor scales
// ---------------------------------------------------------------------------

Eigen::Vector2d anchor_scale_vector(const Anchor& anchor, const AnchorPopulation& pop,
                                    ScaleSource source) {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  if (anchor.children.empty()) return sum;
  if (source == ScaleSource::OffsetMean) {
    for (const auto& o : anchor.offsets) sum += o.cwiseAbs();
    sum *= anchor.scale_factor;
  } else {
    for (const std::size_t i : anchor.children) sum += pop.primitives[i].scales();
  }
  return sum / static_cast<double>(anchor.children.size());
}

void refresh_scale_vectors(AnchorPopulation& pop, ScaleSource source) {
  for (auto& anchor : pop.anchors) anchor.scale_vector = anchor_scale_vector(anchor, pop, source);
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::EmptySeries, "median of an empty set");
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

Eigen::VectorXd anchor_scale_norm(const std::vector<Anchor>& anchors) {
  if (anchors.empty()) throw Error(Errc::EmptySeries, "no anchors");
  Eigen::VectorXd u(static_cast<Eigen::Index>(anchors.size()));
  for (std::size_t v = 0; v < anchors.size(); ++v) {
    u[static_cast<Eigen::Index>(v)] = anchors[v].scale_vector.norm();
  }
  const double med = median(std::vector<double>(u.data(), u.data() + u.size()));
  if (!(med > 0.0)) throw Error(Errc::AllZeroScales, "median anchor scale is zero");
  return u / med;
}

// ---------------------------------------------------------------------------
// Policy application
// ---------------------------------------------------------------------------

namespace {

GaussianPrimitive make_clone(const GaussianPrimitive& parent) {
  GaussianPrimitive child = parent;
  const Eigen::Vector2d s = parent.scales();
  const int axis = s[0] >= s[1] ? 0 : 1;
  child.mean = parent.mean + s[axis] * parent.rotation_matrix().col(axis);
  child.grad_accum = 0.0;
  child.grad_count = 0;
  return child;
}

}  // namespace

DensityUpdate apply_policy(AnchorPopulation& pop, double q, double q_bar,
                           const DensityPolicyConfig& cfg) {
  check(cfg);
  const std::size_t n = pop.size();
  DensityUpdate update;
  update.size_before = n;

  const Thresholds th = frame_thresholds(q, q_bar, cfg);
  update.thresholds.q = q;
  update.thresholds.q_bar = q_bar;
  update.thresholds.theta = th.theta;
  update.thresholds.omega_prime = th.omega;

  if (cfg.scale_pruning && !pop.anchors.empty()) {
    refresh_scale_vectors(pop, cfg.scale_source);
    const Eigen::VectorXd u_tilde = anchor_scale_norm(pop.anchors);
    update.thresholds.omega_scale.resize(pop.anchors.size());
    for (std::size_t v = 0; v < pop.anchors.size(); ++v) {
      const double u = u_tilde[static_cast<Eigen::Index>(v)];
      update.thresholds.omega_scale[v] = scale_prune_threshold(q_bar, u, cfg.omega0);
      if (scale_threshold_overflows(q_bar, u, cfg.omega0)) {
        update.warnings.push_back("ThresholdOverflow: scale threshold of anchor " +
                                  std::to_string(v) + " clamped to 1");
      }
    }
  }

  std::vector<bool> keep(n, true);
  std::vector<std::size_t> parents;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& prim = pop.primitives[i];
    const double alpha = prim.opacity();
    Decision d = base_decision(prim.mean_gradient(), alpha, th.theta, th.omega);
    if (d == Decision::Prune) {
      update.pruned.push_back({i, PruneReason::Opacity});
      keep[i] = false;
      continue;
    }
    if (!update.thresholds.omega_scale.empty() &&
        alpha < update.thresholds.omega_scale[prim.anchor]) {
      update.pruned.push_back({i, PruneReason::Scale});
      keep[i] = false;
      continue;
    }
    if (d == Decision::Densify) parents.push_back(i);
  }

  const std::size_t survivors = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
  if (cfg.max_primitives > 0) {
    const std::size_t room = cfg.max_primitives > survivors ? cfg.max_primitives - survivors : 0;
    if (parents.size() > room) {
      update.warnings.push_back("densification capped at " + std::to_string(cfg.max_primitives) +
                                " primitives");
      parents.resize(room);
    }
  }

  // Rebuild: survivors in order, then clones in parent order.
  std::vector<GaussianPrimitive> next;
  next.reserve(survivors + parents.size());
  std::vector<std::size_t> new_index(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    new_index[i] = next.size();
    next.push_back(pop.primitives[i]);
    update.source_index.push_back(static_cast<std::ptrdiff_t>(i));
  }
  for (const std::size_t p : parents) {
    auto& parent = next[new_index[p]];
    parent.grad_accum = 0.0;
    parent.grad_count = 0;
    GaussianPrimitive child = make_clone(parent);
    update.densified.push_back({p, next.size(), child.mean});
    next.push_back(std::move(child));
    update.source_index.push_back(-1);
  }

  // Re-derive anchor ownership: offsets follow the (possibly new) means.
  std::vector<bool> anchor_alive(pop.anchors.size(), false);
  for (const auto& prim : next) anchor_alive[prim.anchor] = true;
  std::vector<Anchor> anchors;
  std::vector<std::size_t> anchor_map(pop.anchors.size(), 0);
  for (std::size_t v = 0; v < pop.anchors.size(); ++v) {
    if (!anchor_alive[v]) continue;
    anchor_map[v] = anchors.size();
    Anchor a = pop.anchors[v];
    a.offsets.clear();
    a.children.clear();
    anchors.push_back(std::move(a));
  }
  for (std::size_t i = 0; i < next.size(); ++i) {
    auto& prim = next[i];
    const Eigen::Vector2d offset =
        update.source_index[i] >= 0 ? pop.anchors[prim.anchor].offsets[prim.slot]
                                    : Eigen::Vector2d((prim.mean - pop.anchors[prim.anchor].position) /
                                                      pop.anchors[prim.anchor].scale_factor);
    prim.anchor = anchor_map[prim.anchor];
    auto& owner = anchors[prim.anchor];
    prim.slot = owner.children.size();
    owner.children.push_back(i);
    owner.offsets.push_back(offset);
  }
  pop.anchors = std::move(anchors);
  pop.primitives = std::move(next);
  update.size_after = pop.size();
  return update;
}

DensityUpdate apply_policy(AnchorPopulation& pop, const ConfidenceSeries& conf, Eigen::Index t,
                           const DensityPolicyConfig& cfg) {
  if (t < 0 || t >= conf.size()) {
    throw Error(Errc::IndexOutOfRange, "frame " + std::to_string(t) + " not in confidence series");
  }
  return apply_policy(pop, conf.q[t], conf.q_bar[t], cfg);
}

std::string to_json(const DensityUpdate& update) {
  nlohmann::json j;
  j["size_before"] = update.size_before;
  j["size_after"] = update.size_after;
  j["thresholds"] = {{"q", update.thresholds.q},
                     {"q_bar", update.thresholds.q_bar},
                     {"theta", update.thresholds.theta},
                     {"omega_prime", update.thresholds.omega_prime},
                     {"omega_scale", update.thresholds.omega_scale}};
  auto& densified = j["densified"] = nlohmann::json::array();
  for (const auto& d : update.densified) {
    densified.push_back({{"parent", d.parent}, {"index", d.index}, {"mean", {d.mean.x(), d.mean.y()}}});
  }
  auto& pruned = j["pruned"] = nlohmann::json::array();
  for (const auto& p : update.pruned) {
    pruned.push_back({{"index", p.index}, {"reason", to_string(p.reason)}});
  }
  j["warnings"] = update.warnings;
  return j.dump();
}

}  // namespace cadc
