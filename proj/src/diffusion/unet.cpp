#include "railgen/diffusion/unet.hpp"

#include "railgen/core/hash.hpp"

namespace railgen::diffusion {

using nn::VectorXf;

LevelBlock::LevelBlock(int in_ch, int out_ch, int emb_dim)
    : conv1(in_ch, out_ch, 3), conv2(out_ch, out_ch, 3),
      tproj(emb_dim, out_ch), pproj(emb_dim, out_ch) {}

void LevelBlock::init(RandomStream& rng) {
  conv1.init(rng);
  conv2.init(rng);
  tproj.init(rng);
  pproj.init(rng);
}

Tensor LevelBlock::forward(const Tensor& x, const VectorXf& temb,
                           const VectorXf& pemb) {
  Tensor h = conv1.forward(x);
  VectorXf bias = tproj.forward(temb) + pproj.forward(pemb);
  const int c = h.dim(0), hh = h.dim(1), ww = h.dim(2);
  for (int ch = 0; ch < c; ++ch) {
    float b = bias[ch];
    float* plane = h.data() + static_cast<size_t>(ch) * hh * ww;
    for (int i = 0; i < hh * ww; ++i) plane[i] += b;
  }
  return act2.forward(conv2.forward(act1.forward(h)));
}

Tensor LevelBlock::backward(const Tensor& dy, VectorXf& d_pemb) {
  Tensor d = act1.backward(conv2.backward(act2.backward(dy)));
  const int c = d.dim(0), hh = d.dim(1), ww = d.dim(2);
  VectorXf dbias(c);
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = d.data() + static_cast<size_t>(ch) * hh * ww;
    double acc = 0.0;
    for (int i = 0; i < hh * ww; ++i) acc += plane[i];
    dbias[ch] = static_cast<float>(acc);
  }
  tproj.backward(dbias);  // sinusoidal input holds no parameters
  d_pemb += pproj.backward(dbias);
  return conv1.backward(d);
}

void LevelBlock::collect(const std::string& prefix,
                         std::vector<nn::ParamView>& out) {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
  tproj.collect(prefix + ".tproj", out);
  pproj.collect(prefix + ".pproj", out);
}

EncoderStack::EncoderStack(int in_ch, int width, int emb_dim) {
  const int chs[5] = {in_ch, width, 2 * width, 4 * width, 4 * width};
  for (int i = 0; i < 4; ++i)
    lev[i] = LevelBlock(i == 0 ? chs[0] : chs[i + 1], chs[i + 1], emb_dim);
  for (int i = 0; i < 3; ++i)
    down[i] = nn::Conv2d(chs[i + 1], chs[i + 2], 3, 2);
}

void EncoderStack::init(RandomStream& rng) {
  for (int i = 0; i < 4; ++i) {
    lev[i].init(rng);
    if (i < 3) down[i].init(rng);
  }
}

EncoderStack::Out EncoderStack::forward(const Tensor& x, const VectorXf& temb,
                                        const VectorXf& pemb, int last) {
  Out o;
  Tensor h = x;
  for (int i = 0; i <= last; ++i) {
    if (i > 0) h = dact[i - 1].forward(down[i - 1].forward(o.e[i - 1]));
    o.e[i] = lev[i].forward(h, temb, pemb);
  }
  return o;
}

Tensor EncoderStack::backward(const Out& d, VectorXf& d_pemb, int last) {
  Tensor g;
  for (int i = last; i >= 0; --i) {
    if (g.empty())
      g = d.e[i];
    else if (!d.e[i].empty())
      add_inplace(g, d.e[i]);
    g = lev[i].backward(g, d_pemb);
    if (i > 0) g = down[i - 1].backward(dact[i - 1].backward(g));
  }
  return g;
}

void EncoderStack::collect_groups(const std::string& prefix, bool frozen,
                                  int last, std::vector<nn::ParamGroup>& out) {
  for (int i = 0; i <= last; ++i) {
    nn::ParamGroup g{prefix + std::to_string(i), frozen, {}};
    lev[i].collect(g.name + ".block", g.params);
    if (i < 3) down[i].collect(g.name + ".down", g.params);
    out.push_back(std::move(g));
  }
}

DecoderStack::DecoderStack(int width, int emb_dim) {
  const int chs[4] = {width, 2 * width, 4 * width, 4 * width};
  for (int i = 0; i < 3; ++i) {
    up[i] = nn::Conv2d(chs[i + 1], chs[i], 3);
    lev[i] = LevelBlock(chs[i], chs[i], emb_dim);
  }
}

void DecoderStack::init(RandomStream& rng) {
  for (int i = 2; i >= 0; --i) {
    up[i].init(rng);
    lev[i].init(rng);
  }
}

Tensor DecoderStack::forward(const EncoderStack::Out& j, const VectorXf& temb,
                             const VectorXf& pemb) {
  Tensor h = j.e[3];
  for (int i = 2; i >= 0; --i) {
    h = uact[i].forward(up[i].forward(nn::upsample2x(h)));
    add_inplace(h, j.e[i]);
    h = lev[i].forward(h, temb, pemb);
  }
  return h;
}

EncoderStack::Out DecoderStack::backward(const Tensor& dy, VectorXf& d_pemb) {
  EncoderStack::Out dj;
  Tensor g = dy;
  for (int i = 0; i <= 2; ++i) {
    g = lev[i].backward(g, d_pemb);
    dj.e[i] = g;
    g = nn::upsample2x_backward(up[i].backward(uact[i].backward(g)));
  }
  dj.e[3] = g;
  return dj;
}

void DecoderStack::collect_groups(const std::string& prefix, bool frozen,
                                  std::vector<nn::ParamGroup>& out) {
  for (int i = 2; i >= 0; --i) {
    nn::ParamGroup g{prefix + std::to_string(i), frozen, {}};
    up[i].collect(g.name + ".up", g.params);
    lev[i].collect(g.name + ".block", g.params);
    out.push_back(std::move(g));
  }
}

UNetDenoiser::UNetDenoiser(Config cfg, uint64_t seed)
    : cfg_(cfg), enc_(cfg.in_ch, cfg.width, cfg.emb_dim),
      dec_(cfg.width, cfg.emb_dim), head_(cfg.width, cfg.in_ch, 1),
      pembed_(cfg.prompt_buckets, cfg.emb_dim) {
  RandomStream rng(derive_seed(seed, "denoiser-init"));
  enc_.init(rng);
  dec_.init(rng);
  head_.init(rng);
  pembed_.init(rng);

  enc_.collect_groups("enc", false, 3, groups_);
  dec_.collect_groups("dec", false, groups_);
  nn::ParamGroup gh{"head", false, {}};
  head_.collect("head", gh.params);
  groups_.push_back(std::move(gh));
  nn::ParamGroup gp{"pemb", false, {}};
  pembed_.collect("pemb", gp.params);
  groups_.push_back(std::move(gp));

  d_pemb_.setZero(cfg_.emb_dim);
}

int UNetDenoiser::prompt_bucket(const std::string& prompt) const {
  return static_cast<int>(fnv1a64(prompt) %
                          static_cast<uint64_t>(cfg_.prompt_buckets));
}

void UNetDenoiser::check_input(const Tensor& x_t) const {
  if (x_t.rank() != 3 || x_t.dim(0) != cfg_.in_ch)
    fail("ShapeError", "denoiser input must be (C,H,W) with declared C");
  if (x_t.dim(1) % 8 != 0 || x_t.dim(2) % 8 != 0 || x_t.dim(1) < 8 ||
      x_t.dim(2) < 8)
    fail("ShapeError", "denoiser input dims must be divisible by 8");
}

void UNetDenoiser::prepare(int t, const std::string& prompt) {
  temb_ = nn::sinusoidal_embedding(t, cfg_.emb_dim);
  prompt_row_ = prompt_bucket(prompt);
  pemb_ = pembed_.forward(prompt_row_);
  d_pemb_.setZero(cfg_.emb_dim);
}

EncoderStack::Out UNetDenoiser::encode(const Tensor& x_t) {
  return enc_.forward(x_t, temb_, pemb_);
}

Tensor UNetDenoiser::decode(const EncoderStack::Out& junctions) {
  return head_.forward(dec_.forward(junctions, temb_, pemb_));
}

EncoderStack::Out UNetDenoiser::decode_backward(const Tensor& d_eps_hat) {
  return dec_.backward(head_.backward(d_eps_hat), d_pemb_);
}

Tensor UNetDenoiser::encode_backward(const EncoderStack::Out& d_junctions) {
  return enc_.backward(d_junctions, d_pemb_);
}

void UNetDenoiser::finish_backward() {
  pembed_.backward(prompt_row_, d_pemb_);
  d_pemb_.setZero(cfg_.emb_dim);
}

Tensor UNetDenoiser::predict(const Tensor& x_t, int t,
                             const std::string& prompt,
                             const Tensor* /*condition*/) {
  check_input(x_t);
  prepare(t, prompt);
  return decode(encode(x_t));
}

void UNetDenoiser::backward(const Tensor& d_eps_hat) {
  encode_backward(decode_backward(d_eps_hat));
  finish_backward();
}

} // namespace railgen::diffusion
