#include "railgen/data/toy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "railgen/core/error.hpp"
#include "railgen/core/rng.hpp"

namespace railgen::data {

namespace {

struct SceneGeometry {
  double vx, vy;          // vanishing point
  double left_x, right_x; // rail x positions at the bottom row
  double base_half_width; // rail half-width at the bottom row
};

SceneGeometry draw_geometry(RandomStream& rng, int h, int w) {
  SceneGeometry g;
  g.vx = rng.uniform(0.40, 0.60) * w;
  g.vy = rng.uniform(0.15, 0.30) * h;
  g.left_x = rng.uniform(0.18, 0.32) * w;
  g.right_x = rng.uniform(0.68, 0.82) * w;
  g.base_half_width = std::max(1.0, w / 44.0);
  return g;
}

void paint_rail(ImageU8& mask, const SceneGeometry& g, double bottom_x, int h,
                int w) {
  const double y_bottom = h - 1;
  for (int y = h - 1; y >= static_cast<int>(std::ceil(g.vy)); --y) {
    double t = (y_bottom - y) / std::max(1.0, y_bottom - g.vy); // 0 bottom, 1 top
    double cx = bottom_x + t * (g.vx - bottom_x);
    double half = std::max(0.5, (1.0 - t) * g.base_half_width);
    int x0 = std::max(0, static_cast<int>(std::floor(cx - half)));
    int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + half) - 1));
    for (int x = x0; x <= x1; ++x)
      mask.at(y, x) = static_cast<uint8_t>(kToyRail);
  }
}

void paint_poles(ImageU8& mask, RandomStream& rng, int h, int w) {
  int n_poles = static_cast<int>(rng.uniform_int(0, 2));
  for (int i = 0; i < n_poles; ++i) {
    bool left = rng.uniform() < 0.5;
    int pw = std::max(1, w / 24);
    int px = left ? static_cast<int>(rng.uniform(0.02, 0.10) * w)
                  : static_cast<int>(rng.uniform(0.88, 0.96) * w);
    int top = static_cast<int>(rng.uniform(0.10, 0.30) * h);
    int bottom = static_cast<int>(rng.uniform(0.70, 0.95) * h);
    for (int y = top; y <= std::min(h - 1, bottom); ++y)
      for (int x = px; x < std::min(w, px + pw); ++x)
        if (mask.at(y, x) == kToyBackground)
          mask.at(y, x) = static_cast<uint8_t>(kToyPole);
  }
}

uint8_t clamp_u8(double v) {
  return static_cast<uint8_t>(std::lround(std::min(255.0, std::max(0.0, v))));
}

} // namespace

ImageU8 render_scene_for_mask(const ImageU8& mask, uint64_t seed) {
  RandomStream rng(derive_seed(seed, "toy-texture"));
  const int h = mask.h;
  const int w = mask.w;
  ImageU8 img(h, w, 3);

  // horizon placed where rails stop appearing, fallback to 1/4 height
  int horizon = h / 4;
  for (int y = 0; y < h; ++y) {
    bool has_rail = false;
    for (int x = 0; x < w && !has_rail; ++x)
      has_rail = mask.at(y, x) == kToyRail;
    if (has_rail) {
      horizon = y;
      break;
    }
  }

  const double sky_base = rng.uniform(150.0, 200.0);
  const double ground_base = rng.uniform(90.0, 130.0);
  const double noise_amp = rng.uniform(6.0, 14.0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double n = rng.uniform(-noise_amp, noise_amp);
      double r, g, b;
      switch (mask.at(y, x)) {
      case kToyRail: {
        double shade = 40.0 + 25.0 * rng.uniform();
        r = g = shade;
        b = shade + 8.0;
        break;
      }
      case kToyPole: {
        double shade = 70.0 + 20.0 * rng.uniform();
        r = shade + 20.0;
        g = shade;
        b = shade - 20.0;
        break;
      }
      default: {
        if (y < horizon) {
          double v = sky_base + (horizon - y) * 0.4;
          r = v - 10.0;
          g = v;
          b = v + 15.0;
        } else {
          double v = ground_base + (y - horizon) * 0.25;
          r = v - 8.0;
          g = v + 6.0;
          b = v - 12.0;
        }
        break;
      }
      }
      img.at(y, x, 0) = clamp_u8(r + n);
      img.at(y, x, 1) = clamp_u8(g + n);
      img.at(y, x, 2) = clamp_u8(b + n);
    }
  }
  return img;
}

ScenePair generate_toy_scene(int index, uint64_t seed, const ToyOptions& opts) {
  if (opts.height < 8 || opts.width < 8)
    fail("InvalidSize", "toy scenes need at least 8x8 pixels");
  RandomStream rng(derive_seed(seed, "toy-geometry"));

  ImageU8 mask(opts.height, opts.width, 1,
               static_cast<uint8_t>(kToyBackground));
  if (!opts.rail_free) {
    SceneGeometry g = draw_geometry(rng, opts.height, opts.width);
    if (opts.with_poles)
      paint_poles(mask, rng, opts.height, opts.width);
    paint_rail(mask, g, g.left_x, opts.height, opts.width);
    paint_rail(mask, g, g.right_x, opts.height, opts.width);
  }

  ScenePair pair;
  pair.mask = std::move(mask);
  pair.image = render_scene_for_mask(pair.mask, seed);
  pair.index = index;
  char buf[24];
  std::snprintf(buf, sizeof(buf), "toy-%05d", index);
  pair.source_id = buf;
  return pair;
}

std::vector<ScenePair> generate_toy_dataset(int n, uint64_t seed,
                                            const ToyOptions& opts) {
  if (n < 1)
    fail("InvalidArgument", "toy dataset size must be >= 1");
  std::vector<ScenePair> pairs;
  pairs.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    pairs.push_back(
        generate_toy_scene(i, derive_seed(seed, "toy-scene", i), opts));
  return pairs;
}

} // namespace railgen::data
