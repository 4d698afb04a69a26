#include "railgen/nn/layers.hpp"

#include <cmath>

#include "railgen/core/error.hpp"
#include "railgen/core/hash.hpp"

namespace railgen::nn {

size_t total_params(const std::vector<ParamGroup>& groups) {
  size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

uint64_t content_hash(const std::vector<ParamGroup>& groups) {
  uint64_t h = kFnvOffset;
  for (const auto& g : groups)
    for (const auto& p : g.params)
      h = fnv1a64(p.value, p.size * sizeof(float), h);
  return h;
}

namespace {

void check_chw(const Tensor& t, int c, const char* who) {
  if (t.rank() != 3 || t.dim(0) != c)
    fail("ShapeError", std::string(who) + ": expected " + std::to_string(c) +
                           " channel planar input");
}

} // namespace

Conv2d::Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad)
    : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride),
      pad_(pad < 0 ? ksize / 2 : pad) {
  w_.setZero(out_ch_, in_ch_ * k_ * k_);
  dw_.setZero(out_ch_, in_ch_ * k_ * k_);
  b_.setZero(out_ch_);
  db_.setZero(out_ch_);
}

void Conv2d::init(RandomStream& rng) {
  float std = std::sqrt(2.0f / static_cast<float>(in_ch_ * k_ * k_));
  for (int j = 0; j < w_.cols(); ++j)
    for (int i = 0; i < w_.rows(); ++i)
      w_(i, j) = static_cast<float>(rng.normal()) * std;
  b_.setZero();
}

void Conv2d::zero_init() {
  w_.setZero();
  b_.setZero();
}

MatrixXf Conv2d::im2col(const Tensor& x, int oh, int ow) const {
  const int h = x.dim(1), w = x.dim(2);
  MatrixXf cols(static_cast<long>(oh) * ow, in_ch_ * k_ * k_);
  long q = 0;
  for (int c = 0; c < in_ch_; ++c) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx, ++q) {
        float* dst = cols.data() + q * cols.rows();
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = 0.0f;
            continue;
          }
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride_ - pad_ + kx;
            dst[oy * ow + ox] =
                (ix < 0 || ix >= w) ? 0.0f : x.at(c, iy, ix);
          }
        }
      }
    }
  }
  return cols;
}

Tensor Conv2d::forward(const Tensor& x) {
  check_chw(x, in_ch_, "Conv2d");
  const int h = x.dim(1), w = x.dim(2);
  const int oh = (h + 2 * pad_ - k_) / stride_ + 1;
  const int ow = (w + 2 * pad_ - k_) / stride_ + 1;
  if (oh < 1 || ow < 1) fail("ShapeError", "Conv2d: output would be empty");
  x_cache_ = x;

  MatrixXf cols = im2col(x, oh, ow);
  Tensor y({out_ch_, oh, ow});
  Eigen::Map<MatrixXf> ym(y.data(), cols.rows(), out_ch_);
  ym.noalias() = cols * w_.transpose();
  ym.rowwise() += b_.transpose();
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  check_chw(dy, out_ch_, "Conv2d backward");
  const Tensor& x = x_cache_;
  const int h = x.dim(1), w = x.dim(2);
  const int oh = dy.dim(1), ow = dy.dim(2);

  Eigen::Map<const MatrixXf> dym(dy.data(), static_cast<long>(oh) * ow,
                                 out_ch_);
  MatrixXf cols = im2col(x, oh, ow);
  dw_.noalias() += dym.transpose() * cols;
  db_ += dym.colwise().sum();

  // col2im scatter-add of dcols back onto the input grid
  MatrixXf dcols(cols.rows(), cols.cols());
  dcols.noalias() = dym * w_;
  Tensor dx(x.shape());
  long q = 0;
  for (int c = 0; c < in_ch_; ++c) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx, ++q) {
        const float* src = dcols.data() + q * dcols.rows();
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride_ - pad_ + kx;
            if (ix < 0 || ix >= w) continue;
            dx.at(c, iy, ix) += src[oy * ow + ox];
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamView>& out) {
  out.push_back({prefix + ".weight", w_.data(), dw_.data(),
                 static_cast<size_t>(w_.size())});
  out.push_back({prefix + ".bias", b_.data(), db_.data(),
                 static_cast<size_t>(b_.size())});
}

Linear::Linear(int in_dim, int out_dim) : in_(in_dim), out_(out_dim) {
  w_.setZero(out_, in_);
  dw_.setZero(out_, in_);
  b_.setZero(out_);
  db_.setZero(out_);
}

void Linear::init(RandomStream& rng) {
  float std = std::sqrt(2.0f / static_cast<float>(in_));
  for (int j = 0; j < w_.cols(); ++j)
    for (int i = 0; i < w_.rows(); ++i)
      w_(i, j) = static_cast<float>(rng.normal()) * std;
  b_.setZero();
}

VectorXf Linear::forward(const VectorXf& x) {
  if (x.size() != in_) fail("ShapeError", "Linear: input dim mismatch");
  x_cache_ = x;
  return w_ * x + b_;
}

VectorXf Linear::backward(const VectorXf& dy) {
  dw_.noalias() += dy * x_cache_.transpose();
  db_ += dy;
  return w_.transpose() * dy;
}

void Linear::collect(const std::string& prefix, std::vector<ParamView>& out) {
  out.push_back({prefix + ".weight", w_.data(), dw_.data(),
                 static_cast<size_t>(w_.size())});
  out.push_back({prefix + ".bias", b_.data(), db_.data(),
                 static_cast<size_t>(b_.size())});
}

Embedding::Embedding(int rows, int dim) : rows_(rows), dim_(dim) {
  table_.setZero(rows_, dim_);
  dtable_.setZero(rows_, dim_);
}

void Embedding::init(RandomStream& rng) {
  for (int j = 0; j < table_.cols(); ++j)
    for (int i = 0; i < table_.rows(); ++i)
      table_(i, j) = static_cast<float>(rng.normal()) * 0.02f;
}

VectorXf Embedding::forward(int row) const {
  if (row < 0 || row >= rows_) fail("ShapeError", "Embedding: row out of range");
  return table_.row(row).transpose();
}

void Embedding::backward(int row, const VectorXf& dvec) {
  dtable_.row(row) += dvec.transpose();
}

void Embedding::collect(const std::string& prefix,
                        std::vector<ParamView>& out) {
  out.push_back({prefix + ".table", table_.data(), dtable_.data(),
                 static_cast<size_t>(table_.size())});
}

Tensor SiLU::forward(const Tensor& x) {
  x_cache_ = x;
  Tensor y(x.shape());
  for (size_t i = 0; i < x.size(); ++i) {
    float v = x[i];
    y[i] = v / (1.0f + std::exp(-v));
  }
  return y;
}

Tensor SiLU::backward(const Tensor& dy) {
  Tensor dx(x_cache_.shape());
  for (size_t i = 0; i < dy.size(); ++i) {
    float v = x_cache_[i];
    float s = 1.0f / (1.0f + std::exp(-v));
    dx[i] = dy[i] * (s * (1.0f + v * (1.0f - s)));
  }
  return dx;
}

Tensor upsample2x(const Tensor& x) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({c, h * 2, w * 2});
  for (int ch = 0; ch < c; ++ch)
    for (int yy = 0; yy < h * 2; ++yy)
      for (int xx = 0; xx < w * 2; ++xx)
        y.at(ch, yy, xx) = x.at(ch, yy / 2, xx / 2);
  return y;
}

Tensor upsample2x_backward(const Tensor& dy) {
  const int c = dy.dim(0), h = dy.dim(1) / 2, w = dy.dim(2) / 2;
  Tensor dx({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int yy = 0; yy < dy.dim(1); ++yy)
      for (int xx = 0; xx < dy.dim(2); ++xx)
        dx.at(ch, yy / 2, xx / 2) += dy.at(ch, yy, xx);
  return dx;
}

VectorXf sinusoidal_embedding(int t, int dim) {
  const int half = dim / 2;
  VectorXf e(dim);
  for (int i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * i / (half > 1 ? half - 1 : 1));
    e[2 * i] = static_cast<float>(std::sin(t * freq));
    e[2 * i + 1] = static_cast<float>(std::cos(t * freq));
  }
  if (dim % 2 == 1) e[dim - 1] = 0.0f;
  return e;
}

} // namespace railgen::nn
