#pragma once

#include <string>
#include <vector>

#include "railgen/core/error.hpp"
#include "railgen/core/tensor.hpp"
#include "railgen/nn/params.hpp"

namespace railgen::diffusion {

// Noise-prediction model. `condition` is an optional conditioning image;
// plain denoisers ignore it, controlled ones require it. Implementations
// with learnable parameters expose them through named groups; training
// drives backward() right after a predict() on the same instance.
class Denoiser {
public:
  virtual ~Denoiser() = default;

  virtual Tensor predict(const Tensor& x_t, int t, const std::string& prompt,
                         const Tensor* condition) = 0;

  virtual void backward(const Tensor& /*d_eps_hat*/) {
    fail("Unsupported", "denoiser has no trainable parameters");
  }

  virtual std::vector<nn::ParamGroup>& groups() { return groups_; }

protected:
  std::vector<nn::ParamGroup> groups_;
};

} // namespace railgen::diffusion
