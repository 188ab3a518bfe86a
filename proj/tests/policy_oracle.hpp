#pragma once

// Brute-force reference for the density policy and a random population
// generator, shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "cadc/density_control.hpp"

namespace cadc::testing {

struct OracleDecisions {
  std::set<std::size_t> densify;
  std::set<std::size_t> prune_opacity;
  std::set<std::size_t> prune_scale;
};

/// Evaluates every primitive independently from the raw formulas.
inline OracleDecisions oracle_policy(const AnchorPopulation& pop, double q, double q_bar,
                                     const DensityPolicyConfig& cfg) {
  double factor = 1.0;
  if (cfg.modulation == Modulation::Exponential) factor = std::exp(q_bar - q);
  if (cfg.modulation == Modulation::LinearVariant) {
    factor = 1.0 + cfg.alpha_lin * (q_bar - q);
    if (factor < 0.05) factor = 0.05;
  }
  double theta = cfg.theta0 * factor;
  if (theta < 1e-8) theta = 1e-8;
  double omega = cfg.omega0 * factor;
  if (omega > 1.0) omega = 1.0;

  std::vector<double> omega_anchor;
  if (cfg.scale_pruning) {
    std::vector<double> u;
    for (const auto& a : pop.anchors) {
      double sx = 0, sy = 0;
      if (cfg.scale_source == ScaleSource::OffsetMean) {
        for (const auto& o : a.offsets) {
          sx += std::abs(o.x());
          sy += std::abs(o.y());
        }
        sx *= a.scale_factor;
        sy *= a.scale_factor;
      } else {
        for (std::size_t c : a.children) {
          sx += std::exp(pop.primitives[c].log_scale.x());
          sy += std::exp(pop.primitives[c].log_scale.y());
        }
      }
      const double k = static_cast<double>(a.children.size());
      sx /= k;
      sy /= k;
      u.push_back(std::sqrt(sx * sx + sy * sy));
    }
    std::vector<double> sorted = u;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double med = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    for (double x : u) omega_anchor.push_back(std::min(1.0, cfg.omega0 * std::exp(q_bar * (x / med))));
  }

  OracleDecisions out;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto& p = pop.primitives[i];
    const double alpha = 1.0 / (1.0 + std::exp(-p.opacity_logit));
    const double g = p.grad_count ? p.grad_accum / static_cast<double>(p.grad_count) : p.grad_accum;
    if (!(g > theta) && alpha < omega) {
      out.prune_opacity.insert(i);
    } else if (cfg.scale_pruning && alpha < omega_anchor[p.anchor]) {
      out.prune_scale.insert(i);
    } else if (g > theta) {
      out.densify.insert(i);
    }
  }
  return out;
}

/// Anchors with 1..max_children children each, consistent bookkeeping.
inline AnchorPopulation random_population(std::mt19937_64& rng, std::size_t max_primitives,
                                          std::size_t max_children = 6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AnchorPopulation pop;
  const std::size_t target = 1 + rng() % max_primitives;
  while (pop.size() < target) {
    Anchor a;
    a.position = {64 * u(rng), 64 * u(rng)};
    a.scale_factor = 0.2 + 4 * u(rng);
    const std::size_t k = std::min<std::size_t>(1 + rng() % max_children, target - pop.size());
    const std::size_t v = pop.anchors.size();
    for (std::size_t j = 0; j < k; ++j) {
      GaussianPrimitive p;
      p.log_scale = {std::log(0.3 + 3 * u(rng)), std::log(0.3 + 3 * u(rng))};
      p.rotation = 6.283185307179586 * u(rng);
      p.set_opacity(std::min(0.999, 0.001 + std::pow(u(rng), 3)));
      p.color = {u(rng), u(rng), u(rng)};
      p.grad_count = 1 + rng() % 50;
      p.grad_accum = 4e-5 * u(rng) * static_cast<double>(p.grad_count);
      p.anchor = v;
      p.slot = j;
      a.offsets.emplace_back(2 * u(rng) - 1, 2 * u(rng) - 1);
      a.children.push_back(pop.primitives.size());
      pop.primitives.push_back(p);
    }
    pop.anchors.push_back(a);
  }
  sync_means(pop);
  return pop;
}

}  // namespace cadc::testing
