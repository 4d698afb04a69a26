#include "railgen/cond/canny.hpp"

#include <cmath>
#include <vector>

#include "railgen/core/error.hpp"
#include "railgen/core/tensor.hpp"

namespace railgen::cond {

namespace {

constexpr double kPi = 3.14159265358979323846;

inline int reflect(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

std::vector<double> gaussian_kernel(double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k)
    v /= sum;
  return k;
}

std::vector<double> blur_separable(const std::vector<double>& src, int h,
                                   int w, const std::vector<double>& k) {
  const int radius = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(src.size()), dst(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<size_t>(i + radius)] *
               src[static_cast<size_t>(y) * w + reflect(x + i, w)];
      tmp[static_cast<size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<size_t>(i + radius)] *
               tmp[static_cast<size_t>(reflect(y + i, h)) * w + x];
      dst[static_cast<size_t>(y) * w + x] = acc;
    }
  return dst;
}

} // namespace

EdgeMap canny_edges(const ImageU8& image, const CannyParams& params) {
  if (!(params.low < params.high))
    fail("InvalidThresholds", "low threshold must be below high threshold");
  if (!(params.sigma > 0.0))
    fail("InvalidThresholds", "sigma must be positive");
  const int h = image.h;
  const int w = image.w;

  std::vector<float> gray_f = to_gray(image);
  std::vector<double> gray(gray_f.begin(), gray_f.end());
  std::vector<double> smooth = blur_separable(gray, h, w, gaussian_kernel(params.sigma));

  auto at = [&](const std::vector<double>& buf, int y, int x) {
    return buf[static_cast<size_t>(reflect(y, h)) * w + reflect(x, w)];
  };

  std::vector<double> mag(static_cast<size_t>(h) * w, 0.0);
  std::vector<double> dir(static_cast<size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double gx = -at(smooth, y - 1, x - 1) + at(smooth, y - 1, x + 1) -
                  2.0 * at(smooth, y, x - 1) + 2.0 * at(smooth, y, x + 1) -
                  at(smooth, y + 1, x - 1) + at(smooth, y + 1, x + 1);
      double gy = at(smooth, y + 1, x - 1) + 2.0 * at(smooth, y + 1, x) +
                  at(smooth, y + 1, x + 1) - at(smooth, y - 1, x - 1) -
                  2.0 * at(smooth, y - 1, x) - at(smooth, y - 1, x + 1);
      mag[static_cast<size_t>(y) * w + x] = std::hypot(gx, gy);
      dir[static_cast<size_t>(y) * w + x] = std::atan2(gy, gx);
    }

  // non-maximum suppression, directions quantized to 4 bins
  std::vector<double> thin(static_cast<size_t>(h) * w, 0.0);
  auto mag_at = [&](int y, int x) -> double {
    if (y < 0 || y >= h || x < 0 || x >= w)
      return 0.0;
    return mag[static_cast<size_t>(y) * w + x];
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = mag[static_cast<size_t>(y) * w + x];
      if (m <= 0.0)
        continue;
      double deg = dir[static_cast<size_t>(y) * w + x] * 180.0 / kPi;
      if (deg < 0.0)
        deg += 180.0;
      double n_neg, n_pos;
      if (deg < 22.5 || deg >= 157.5) { // horizontal gradient
        n_neg = mag_at(y, x - 1);
        n_pos = mag_at(y, x + 1);
      } else if (deg < 67.5) { // diagonal /
        n_neg = mag_at(y + 1, x - 1);
        n_pos = mag_at(y - 1, x + 1);
      } else if (deg < 112.5) { // vertical gradient
        n_neg = mag_at(y - 1, x);
        n_pos = mag_at(y + 1, x);
      } else { // diagonal backslash
        n_neg = mag_at(y - 1, x - 1);
        n_pos = mag_at(y + 1, x + 1);
      }
      if (m >= n_neg && m > n_pos)
        thin[static_cast<size_t>(y) * w + x] = m;
    }

  // hysteresis: flood from strong pixels across weak ones, 8-connected
  std::vector<uint8_t> state(static_cast<size_t>(h) * w, 0); // 0 none, 1 weak, 2 strong
  std::vector<int> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      size_t i = static_cast<size_t>(y) * w + x;
      if (thin[i] >= params.high) {
        state[i] = 2;
        stack.push_back(static_cast<int>(i));
      } else if (thin[i] >= params.low) {
        state[i] = 1;
      }
    }
  while (!stack.empty()) {
    int i = stack.back();
    stack.pop_back();
    int y = i / w;
    int x = i % w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dy == 0 && dx == 0)
          continue;
        int ny = y + dy;
        int nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w)
          continue;
        size_t ni = static_cast<size_t>(ny) * w + nx;
        if (state[ni] == 1) {
          state[ni] = 2;
          stack.push_back(static_cast<int>(ni));
        }
      }
  }

  EdgeMap out;
  out.params = params;
  out.pixels = ImageU8(h, w, 1);
  for (size_t i = 0; i < state.size(); ++i)
    out.pixels.px[i] = state[i] == 2 ? 255 : 0;
  return out;
}

} // namespace railgen::cond
