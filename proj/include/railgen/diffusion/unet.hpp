#pragma once

#include <array>
#include <memory>

#include "railgen/diffusion/denoiser.hpp"
#include "railgen/nn/layers.hpp"

namespace railgen::diffusion {

// Two 3x3 convs with SiLU; timestep and prompt embeddings enter as learned
// per-channel biases after the first conv.
struct LevelBlock {
  nn::Conv2d conv1, conv2;
  nn::SiLU act1, act2;
  nn::Linear tproj, pproj;

  LevelBlock() = default;
  LevelBlock(int in_ch, int out_ch, int emb_dim);

  void init(RandomStream& rng);
  Tensor forward(const Tensor& x, const nn::VectorXf& temb,
                 const nn::VectorXf& pemb);
  // Returns dx; prompt-embedding gradient accumulates into d_pemb.
  Tensor backward(const Tensor& dy, nn::VectorXf& d_pemb);
  void collect(const std::string& prefix, std::vector<nn::ParamView>& out);
};

// Four resolution levels joined by stride-2 convs. Level outputs double as
// decoder skip inputs and as the control branch's tap points. A level's
// param group includes the stride-2 conv that consumes its output.
struct EncoderStack {
  std::array<LevelBlock, 4> lev;
  std::array<nn::Conv2d, 3> down;
  std::array<nn::SiLU, 3> dact;

  struct Out {
    std::array<Tensor, 4> e;
  };

  EncoderStack() = default;
  EncoderStack(int in_ch, int width, int emb_dim);

  void init(RandomStream& rng);
  // Runs levels 0..last inclusive; untouched outputs stay empty.
  Out forward(const Tensor& x, const nn::VectorXf& temb,
              const nn::VectorXf& pemb, int last = 3);
  // d holds upstream gradients per level output (empty = no signal from
  // that tap); returns dx for the same prefix run.
  Tensor backward(const Out& d, nn::VectorXf& d_pemb, int last = 3);
  void collect_groups(const std::string& prefix, bool frozen, int last,
                      std::vector<nn::ParamGroup>& out);
};

// Mirror of the encoder: upsample, merge the skip junction additively,
// refine. forward() consumes junction tensors (skips, possibly augmented
// by a control branch); backward() returns gradients for those junctions.
struct DecoderStack {
  std::array<nn::Conv2d, 3> up;
  std::array<nn::SiLU, 3> uact;
  std::array<LevelBlock, 3> lev;

  DecoderStack() = default;
  DecoderStack(int width, int emb_dim);

  void init(RandomStream& rng);
  Tensor forward(const EncoderStack::Out& j, const nn::VectorXf& temb,
                 const nn::VectorXf& pemb);
  EncoderStack::Out backward(const Tensor& dy, nn::VectorXf& d_pemb);
  void collect_groups(const std::string& prefix, bool frozen,
                      std::vector<nn::ParamGroup>& out);
};

// Reference noise-prediction network: encoder-decoder with additive skips
// over 4 resolution levels, sinusoidal timestep embedding, and a hashed
// prompt-bucket embedding table. Ignores the optional condition input;
// conditioning attaches externally via the control branch.
class UNetDenoiser : public Denoiser {
public:
  struct Config {
    int in_ch = 3;
    int width = 16;
    int emb_dim = 32;
    int prompt_buckets = 64;
  };

  UNetDenoiser(Config cfg, uint64_t seed);
  UNetDenoiser(const UNetDenoiser&) = delete;
  UNetDenoiser& operator=(const UNetDenoiser&) = delete;

  Tensor predict(const Tensor& x_t, int t, const std::string& prompt,
                 const Tensor* condition) override;
  void backward(const Tensor& d_eps_hat) override;

  const Config& config() const { return cfg_; }

  // Split-phase access for the control branch. prepare() fixes the step
  // embeddings; encode/decode/(backwards) then run around caller-supplied
  // junction tensors.
  void prepare(int t, const std::string& prompt);
  const nn::VectorXf& temb() const { return temb_; }
  const nn::VectorXf& pemb() const { return pemb_; }
  EncoderStack::Out encode(const Tensor& x_t);
  Tensor decode(const EncoderStack::Out& junctions);
  EncoderStack::Out decode_backward(const Tensor& d_eps_hat);
  Tensor encode_backward(const EncoderStack::Out& d_junctions);
  void finish_backward();  // flushes the prompt-table gradient

  EncoderStack& encoder_stack() { return enc_; }
  int prompt_bucket(const std::string& prompt) const;
  void check_input(const Tensor& x_t) const;

private:
  Config cfg_;
  EncoderStack enc_;
  DecoderStack dec_;
  nn::Conv2d head_;
  nn::Embedding pembed_;

  nn::VectorXf temb_, pemb_, d_pemb_;
  int prompt_row_ = 0;
};

} // namespace railgen::diffusion
