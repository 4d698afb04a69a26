#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "railgen/core/rng.hpp"
#include "railgen/core/tensor.hpp"
#include "railgen/nn/params.hpp"

namespace railgen::nn {

using Eigen::MatrixXf;
using Eigen::VectorXf;

// 2D convolution over planar (C,H,W) tensors, zero padding, im2col + GEMM.
// One in-flight forward per instance: backward() consumes the cached input
// of the most recent forward().
class Conv2d {
public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int ksize, int stride = 1, int pad = -1);

  void init(RandomStream& rng);   // He-normal weights, zero bias
  void zero_init();               // all-zero weights and bias

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);  // accumulates dW/db, returns dx

  void collect(const std::string& prefix, std::vector<ParamView>& out);

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }

private:
  MatrixXf im2col(const Tensor& x, int oh, int ow) const;

  int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
  MatrixXf w_, dw_;  // (out_ch, in_ch*k*k)
  VectorXf b_, db_;
  Tensor x_cache_;
};

// Fully connected layer on vectors.
class Linear {
public:
  Linear() = default;
  Linear(int in_dim, int out_dim);

  void init(RandomStream& rng);

  VectorXf forward(const VectorXf& x);
  VectorXf backward(const VectorXf& dy);

  void collect(const std::string& prefix, std::vector<ParamView>& out);

private:
  int in_ = 0, out_ = 0;
  MatrixXf w_, dw_;
  VectorXf b_, db_;
  VectorXf x_cache_;
};

// Lookup table of learned vectors; rows addressed by bucket index.
class Embedding {
public:
  Embedding() = default;
  Embedding(int rows, int dim);

  void init(RandomStream& rng);

  VectorXf forward(int row) const;
  void backward(int row, const VectorXf& dvec);

  int rows() const { return rows_; }
  int dim() const { return dim_; }

  void collect(const std::string& prefix, std::vector<ParamView>& out);

private:
  int rows_ = 0, dim_ = 0;
  MatrixXf table_, dtable_;
};

// x * sigmoid(x), elementwise. Caches input for backward.
class SiLU {
public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

private:
  Tensor x_cache_;
};

// Nearest-neighbor 2x spatial upsample and its adjoint (2x2 block sum).
Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& dy);

// Sinusoidal timestep embedding, parameter-free.
VectorXf sinusoidal_embedding(int t, int dim);

} // namespace railgen::nn
