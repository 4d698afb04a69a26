#pragma once

#include "railgen/core/image.hpp"

namespace railgen::cond {

struct CannyParams {
  double sigma = 1.4;
  double low = 50.0;
  double high = 150.0;
};

struct EdgeMap {
  ImageU8 pixels; // H x W x 1, values in {0, 255}
  CannyParams params;
};

// Classic Canny: luma -> separable Gaussian blur -> 3x3 Sobel ->
// non-maximum suppression (4 quantized directions) -> double-threshold
// hysteresis with 8-connectivity. Borders are handled by replication.
//
// Conventions pinned so the reference implementation in the test suite can
// match exactly: suppression keeps a pixel when its magnitude is >= the
// neighbor on the negative side of the gradient direction and > the
// neighbor on the positive side, which collapses symmetric two-pixel
// plateaus to a single line.
EdgeMap canny_edges(const ImageU8& image, const CannyParams& params);

} // namespace railgen::cond
