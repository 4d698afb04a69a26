#pragma once

#include <cstddef>
#include <vector>

#include "railgen/core/image.hpp"

namespace railgen {

// Dense float array, row-major over an explicit shape. Model activations
// and parameters use planar (C, H, W) layout.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, float fill);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int dim(size_t i) const { return shape_[i]; }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](size_t i) { return data_[i]; }
  float operator[](size_t i) const { return data_[i]; }

  // (C,H,W) accessor
  float& at(int c, int y, int x) {
    return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  float at(int c, int y, int x) const {
    return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(float v);
  void zero() { fill(0.0f); }

  bool all_finite() const;

private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

// Elementwise helpers; shapes must match (ShapeError otherwise).
void add_inplace(Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);

// Image <-> tensor conversion. Pixel values map to [-1, 1] for the
// diffusion path and [0, 1] for condition/feature inputs.
Tensor image_to_tensor_signed(const ImageU8& img);
Tensor image_to_tensor_unit(const ImageU8& img);
ImageU8 tensor_to_image_signed(const Tensor& t);

} // namespace railgen
