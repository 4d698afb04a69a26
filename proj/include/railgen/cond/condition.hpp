#pragma once

#include <string>

#include "railgen/cond/canny.hpp"
#include "railgen/core/image.hpp"
#include "railgen/core/tensor.hpp"

namespace railgen::cond {

enum class Scheme { MaskOnly, CannyOnly, Cmb12, Cmb21, Cmb111 };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name); // UnknownScheme on bad input

struct ConditionImage {
  ImageU8 channels; // H x W x 3
  Scheme scheme = Scheme::MaskOnly;
  int provenance = -1; // source ScenePair index
};

// (S, S, S) from a single-channel raster. scheme must be MaskOnly or
// CannyOnly, stating what the channel holds.
ConditionImage replicate_channels(const ImageU8& single, Scheme scheme);

// Channel layouts, in storage order (ch0, ch1, ch2):
//   Cmb12  -> (E, M, M)
//   Cmb111 -> (M, E, M)
//   Cmb21  -> (M, E, E)
ConditionImage combine_condition(const ImageU8& mask, const EdgeMap& edges,
                                 Scheme scheme);

// Builds the condition for one (mask, image) pair under any scheme,
// running Canny when edges are needed.
ConditionImage build_condition(const ImageU8& mask, const ImageU8& image,
                               Scheme scheme, const CannyParams& params,
                               int provenance);

// planar (3, H, W) float tensor, each channel / 255
Tensor normalize_condition(const ConditionImage& cond);

} // namespace railgen::cond
