#include "cadc/population.hpp"

#include <string>

#include "cadc/error.hpp"

namespace cadc {

Eigen::Vector2d gaussian_mean_from_anchor(const Anchor& anchor, std::size_t i) {
  if (i >= anchor.offsets.size()) {
    throw Error(Errc::IndexOutOfRange, "offset " + std::to_string(i) + " of anchor with " +
                                           std::to_string(anchor.offsets.size()) + " offsets");
  }
  return anchor.position + anchor.offsets[i] * anchor.scale_factor;
}

void sync_means(AnchorPopulation& pop) {
  for (auto& prim : pop.primitives) {
    prim.mean = gaussian_mean_from_anchor(pop.anchors[prim.anchor], prim.slot);
  }
}

void sync_offsets(AnchorPopulation& pop) {
  for (const auto& prim : pop.primitives) {
    auto& anchor = pop.anchors[prim.anchor];
    anchor.offsets[prim.slot] = (prim.mean - anchor.position) / anchor.scale_factor;
  }
}

void check_population(const AnchorPopulation& pop) {
  auto fail = [](const std::string& msg) { throw Error(Errc::InvalidConfig, msg); };
  std::size_t owned = 0;
  for (std::size_t v = 0; v < pop.anchors.size(); ++v) {
    const auto& anchor = pop.anchors[v];
    if (anchor.offsets.empty()) fail("anchor " + std::to_string(v) + " has no children");
    if (anchor.offsets.size() != anchor.children.size()) {
      fail("anchor " + std::to_string(v) + " offsets/children size mismatch");
    }
    if (!(anchor.scale_factor > 0.0)) fail("anchor " + std::to_string(v) + " scale_factor <= 0");
    for (std::size_t j = 0; j < anchor.children.size(); ++j) {
      const std::size_t i = anchor.children[j];
      if (i >= pop.primitives.size() || pop.primitives[i].anchor != v ||
          pop.primitives[i].slot != j) {
        fail("anchor " + std::to_string(v) + " child " + std::to_string(j) + " is inconsistent");
      }
    }
    owned += anchor.children.size();
  }
  if (owned != pop.primitives.size()) fail("primitive not owned by exactly one anchor");
}

}  // namespace cadc
