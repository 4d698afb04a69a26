#include "railgen/diffusion/codec.hpp"

#include "railgen/core/error.hpp"
#include "railgen/nn/optim.hpp"

namespace railgen::diffusion {

TinyAutoencoder::TinyAutoencoder(int in_ch, int hidden, int latent_ch,
                                 uint64_t seed)
    : in_ch_(in_ch), latent_ch_(latent_ch),
      enc1_(in_ch, hidden, 3, 2), enc2_(hidden, latent_ch, 3, 1),
      dec1_(latent_ch, hidden, 3, 1), dec2_(hidden, in_ch, 3, 1) {
  RandomStream rng(derive_seed(seed, "codec-init"));
  enc1_.init(rng);
  enc2_.init(rng);
  dec1_.init(rng);
  dec2_.init(rng);
  nn::ParamGroup g;
  g.name = "codec";
  enc1_.collect("codec.enc1", g.params);
  enc2_.collect("codec.enc2", g.params);
  dec1_.collect("codec.dec1", g.params);
  dec2_.collect("codec.dec2", g.params);
  groups_.push_back(std::move(g));
}

Tensor TinyAutoencoder::encode(const Tensor& image) {
  return enc2_.forward(ea1_.forward(enc1_.forward(image)));
}

Tensor TinyAutoencoder::decode(const Tensor& latent) {
  return dec2_.forward(da1_.forward(dec1_.forward(nn::upsample2x(latent))));
}

std::vector<int> TinyAutoencoder::latent_shape(const std::vector<int>& s) const {
  if (s.size() != 3 || s[0] != in_ch_ || s[1] % 2 != 0 || s[2] % 2 != 0)
    fail("ShapeError", "autoencoder needs (C,H,W) with even H and W");
  return {latent_ch_, s[1] / 2, s[2] / 2};
}

double TinyAutoencoder::reconstruction_step(const Tensor& image) {
  Tensor recon = decode(encode(image));
  double loss = 0.0;
  Tensor dr(recon.shape());
  const double inv = 1.0 / static_cast<double>(recon.size());
  for (size_t i = 0; i < recon.size(); ++i) {
    double d = recon[i] - image[i];
    loss += d * d * inv;
    dr[i] = static_cast<float>(2.0 * d * inv);
  }
  Tensor g = dec1_.backward(da1_.backward(dec2_.backward(dr)));
  g = nn::upsample2x_backward(g);
  enc1_.backward(ea1_.backward(enc2_.backward(g)));
  return loss;
}

double train_codec(TinyAutoencoder& codec, const std::vector<Tensor>& images,
                   int passes, float lr) {
  nn::Adam opt(lr);
  double last = 0.0;
  for (int p = 0; p < passes; ++p) {
    last = 0.0;
    for (const auto& img : images) {
      nn::Adam::zero_grad(codec.groups());
      last += codec.reconstruction_step(img);
      opt.step(codec.groups());
    }
    last /= static_cast<double>(images.size());
  }
  return last;
}

} // namespace railgen::diffusion
