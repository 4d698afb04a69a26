#pragma once

#include <vector>

#include "railgen/core/tensor.hpp"
#include "railgen/nn/layers.hpp"
#include "railgen/nn/params.hpp"

namespace railgen::diffusion {

// Maps images (signed [-1,1] tensors) to the space diffusion runs in.
class LatentCodec {
public:
  virtual ~LatentCodec() = default;
  virtual Tensor encode(const Tensor& image) = 0;
  virtual Tensor decode(const Tensor& latent) = 0;
  virtual std::vector<int> latent_shape(const std::vector<int>& image_shape) const = 0;
};

// Pixel-space diffusion: encode and decode are exact identities.
class IdentityCodec : public LatentCodec {
public:
  Tensor encode(const Tensor& image) override { return image; }
  Tensor decode(const Tensor& latent) override { return latent; }
  std::vector<int> latent_shape(const std::vector<int>& s) const override {
    return s;
  }
};

// Small learned alternative: one stride-2 stage down and back up. Trained
// by pixel MSE; reconstruction is approximate, so the identity-exactness
// contract applies only to IdentityCodec.
class TinyAutoencoder : public LatentCodec {
public:
  TinyAutoencoder(int in_ch, int hidden, int latent_ch, uint64_t seed);

  Tensor encode(const Tensor& image) override;
  Tensor decode(const Tensor& latent) override;
  std::vector<int> latent_shape(const std::vector<int>& s) const override;

  std::vector<nn::ParamGroup>& groups() { return groups_; }

  // One reconstruction-loss gradient step on a single image; returns the loss.
  double reconstruction_step(const Tensor& image);

private:
  int in_ch_, latent_ch_;
  nn::Conv2d enc1_, enc2_, dec1_, dec2_;
  nn::SiLU ea1_, da1_;
  std::vector<nn::ParamGroup> groups_;
};

// Runs reconstruction_step over the images for the given number of passes
// with Adam; returns mean loss of the final pass.
double train_codec(TinyAutoencoder& codec, const std::vector<Tensor>& images,
                   int passes, float lr);

} // namespace railgen::diffusion
