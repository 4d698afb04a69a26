#include "railgen/cond/condition.hpp"

#include "railgen/core/error.hpp"

namespace railgen::cond {

std::string scheme_name(Scheme s) {
  switch (s) {
  case Scheme::MaskOnly:
    return "mask";
  case Scheme::CannyOnly:
    return "canny";
  case Scheme::Cmb12:
    return "cmb12";
  case Scheme::Cmb21:
    return "cmb21";
  case Scheme::Cmb111:
    return "cmb111";
  }
  fail("UnknownScheme", "invalid scheme value");
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "mask")
    return Scheme::MaskOnly;
  if (name == "canny")
    return Scheme::CannyOnly;
  if (name == "cmb12")
    return Scheme::Cmb12;
  if (name == "cmb21")
    return Scheme::Cmb21;
  if (name == "cmb111")
    return Scheme::Cmb111;
  fail("UnknownScheme", "unknown condition scheme '" + name + "'");
}

ConditionImage replicate_channels(const ImageU8& single, Scheme scheme) {
  if (single.c != 1)
    fail("InvalidInput", "replicate_channels expects a single-channel raster");
  if (scheme != Scheme::MaskOnly && scheme != Scheme::CannyOnly)
    fail("UnknownScheme", "replicate_channels produces MaskOnly or CannyOnly");
  ConditionImage out;
  out.scheme = scheme;
  out.channels = ImageU8(single.h, single.w, 3);
  for (int y = 0; y < single.h; ++y)
    for (int x = 0; x < single.w; ++x) {
      uint8_t v = single.at(y, x);
      out.channels.at(y, x, 0) = v;
      out.channels.at(y, x, 1) = v;
      out.channels.at(y, x, 2) = v;
    }
  return out;
}

ConditionImage combine_condition(const ImageU8& mask, const EdgeMap& edges,
                                 Scheme scheme) {
  const ImageU8& e = edges.pixels;
  if (mask.c != 1 || e.c != 1)
    fail("InvalidInput", "combine_condition expects single-channel inputs");
  if (!mask.same_dims(e))
    fail("SizeMismatch", "mask and edge map dimensions differ");

  const ImageU8* ch[3];
  switch (scheme) {
  case Scheme::Cmb12:
    ch[0] = &e;
    ch[1] = &mask;
    ch[2] = &mask;
    break;
  case Scheme::Cmb111:
    ch[0] = &mask;
    ch[1] = &e;
    ch[2] = &mask;
    break;
  case Scheme::Cmb21:
    ch[0] = &mask;
    ch[1] = &e;
    ch[2] = &e;
    break;
  default:
    fail("UnknownScheme", "combine_condition needs a combined scheme");
  }

  ConditionImage out;
  out.scheme = scheme;
  out.channels = ImageU8(mask.h, mask.w, 3);
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x)
      for (int k = 0; k < 3; ++k)
        out.channels.at(y, x, k) = ch[k]->at(y, x);
  return out;
}

ConditionImage build_condition(const ImageU8& mask, const ImageU8& image,
                               Scheme scheme, const CannyParams& params,
                               int provenance) {
  ConditionImage out;
  switch (scheme) {
  case Scheme::MaskOnly:
    out = replicate_channels(mask, Scheme::MaskOnly);
    break;
  case Scheme::CannyOnly:
    out = replicate_channels(canny_edges(image, params).pixels,
                             Scheme::CannyOnly);
    break;
  default:
    out = combine_condition(mask, canny_edges(image, params), scheme);
    break;
  }
  out.provenance = provenance;
  return out;
}

Tensor normalize_condition(const ConditionImage& cond) {
  return image_to_tensor_unit(cond.channels);
}

} // namespace railgen::cond
