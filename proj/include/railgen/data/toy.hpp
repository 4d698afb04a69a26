#pragma once

#include <cstdint>
#include <vector>

#include "railgen/data/dataset.hpp"

namespace railgen::data {

struct ToyOptions {
  int height = 64;
  int width = 64;
  bool with_poles = true;
  bool rail_free = false; // true -> mask is background only
};

// One procedurally drawn railway scene: two rails converging toward a
// vanishing point over a textured background, optional trackside poles.
// The mask is exact by construction. Deterministic for a given seed.
ScenePair generate_toy_scene(int index, uint64_t seed, const ToyOptions& opts);

std::vector<ScenePair> generate_toy_dataset(int n, uint64_t seed,
                                            const ToyOptions& opts = {});

// Re-renders the photo layer for an existing mask with a fresh texture
// seed; used when a cheap mask-aligned variant of a scene is needed.
ImageU8 render_scene_for_mask(const ImageU8& mask, uint64_t seed);

} // namespace railgen::data
