#pragma once

#include <cstdint>
#include <vector>

namespace railgen {

// Interleaved 8-bit raster, c in {1, 3}. Single-channel images double as
// class-id masks.
struct ImageU8 {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<uint8_t> px;

  ImageU8() = default;
  ImageU8(int h_, int w_, int c_, uint8_t fill = 0)
      : h(h_), w(w_), c(c_),
        px(static_cast<size_t>(h_) * w_ * c_, fill) {}

  uint8_t& at(int y, int x, int ch = 0) {
    return px[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  uint8_t at(int y, int x, int ch = 0) const {
    return px[(static_cast<size_t>(y) * w + x) * c + ch];
  }

  size_t size() const { return px.size(); }
  bool empty() const { return px.empty(); }

  bool same_dims(const ImageU8& o) const { return h == o.h && w == o.w; }

  bool operator==(const ImageU8& o) const {
    return h == o.h && w == o.w && c == o.c && px == o.px;
  }
};

// Rec.601 luma, kept in float
std::vector<float> to_gray(const ImageU8& img);

} // namespace railgen
