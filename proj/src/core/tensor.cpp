#include "railgen/core/tensor.hpp"

#include <cmath>

#include "railgen/core/error.hpp"

namespace railgen {

namespace {
size_t numel(const std::vector<int>& shape) {
  size_t n = shape.empty() ? 0 : 1;
  for (int d : shape) {
    if (d <= 0)
      fail("InvalidSize", "tensor dimensions must be positive");
    n *= static_cast<size_t>(d);
  }
  return n;
}
} // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(numel(shape_), 0.0f) {}

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(numel(shape_), fill) {}

void Tensor::fill(float v) {
  for (auto& x : data_)
    x = v;
}

void add_inplace(Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    fail("ShapeError", "elementwise add on mismatched shapes");
  for (size_t i = 0; i < a.size(); ++i)
    a[i] += b[i];
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

bool Tensor::all_finite() const {
  for (float x : data_)
    if (!std::isfinite(x))
      return false;
  return true;
}

std::vector<float> to_gray(const ImageU8& img) {
  std::vector<float> g(static_cast<size_t>(img.h) * img.w);
  if (img.c == 1) {
    for (size_t i = 0; i < g.size(); ++i)
      g[i] = static_cast<float>(img.px[i]);
    return g;
  }
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      g[static_cast<size_t>(y) * img.w + x] =
          0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) +
          0.114f * img.at(y, x, 2);
  return g;
}

Tensor image_to_tensor_signed(const ImageU8& img) {
  Tensor t({img.c, img.h, img.w});
  for (int ch = 0; ch < img.c; ++ch)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        t.at(ch, y, x) = static_cast<float>(img.at(y, x, ch)) / 127.5f - 1.0f;
  return t;
}

Tensor image_to_tensor_unit(const ImageU8& img) {
  Tensor t({img.c, img.h, img.w});
  for (int ch = 0; ch < img.c; ++ch)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        t.at(ch, y, x) = static_cast<float>(img.at(y, x, ch)) / 255.0f;
  return t;
}

ImageU8 tensor_to_image_signed(const Tensor& t) {
  if (t.rank() != 3)
    fail("ShapeError", "expected (C,H,W) tensor");
  ImageU8 img(t.dim(1), t.dim(2), t.dim(0));
  for (int ch = 0; ch < img.c; ++ch)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        float v = (t.at(ch, y, x) + 1.0f) * 127.5f;
        v = v < 0.0f ? 0.0f : (v > 255.0f ? 255.0f : v);
        img.at(y, x, ch) = static_cast<uint8_t>(std::lround(v));
      }
  return img;
}

} // namespace railgen
