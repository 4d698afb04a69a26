#pragma once

#include <span>
#include <string>
#include <vector>

#include "railgen/core/rng.hpp"
#include "railgen/diffusion/codec.hpp"
#include "railgen/diffusion/denoiser.hpp"
#include "railgen/diffusion/schedule.hpp"
#include "railgen/nn/optim.hpp"
#include "railgen/prompt/prompt.hpp"

namespace railgen::diffusion {

struct TrainItem {
  Tensor x0;                        // clean image, signed [-1,1]
  std::string prompt;
  const Tensor* condition = nullptr;
};

Tensor gaussian_tensor(const std::vector<int>& shape, RandomStream& rng);

// Draws t ~ U[1,T] per item, corrupts encode(x0) by iterating forward_step
// with fresh noise at every step, and regresses the prediction onto the
// noise added last. One optimizer update per call; frozen groups excluded.
class DiffusionTrainer {
public:
  DiffusionTrainer(Denoiser& den, LatentCodec& codec, NoiseSchedule sched,
                   float lr);

  double step(std::span<const TrainItem> batch, RandomStream& rng);

  long steps_taken() const { return static_cast<long>(losses_.size()); }
  const std::vector<double>& losses() const { return losses_; }
  const NoiseSchedule& schedule() const { return sched_; }

private:
  Denoiser& den_;
  LatentCodec& codec_;
  NoiseSchedule sched_;
  nn::Adam opt_;
  std::vector<double> losses_;
};

struct SampleOptions {
  bool stochastic = false;  // re-inject posterior noise (opt-in)
  double guidance = 2.0;    // negative-prompt steering strength
};

// Deterministic reverse pass from a caller-supplied x_T down to x_0.
// `rng` is consulted only when opts.stochastic is set.
Tensor sample_latent(Denoiser& den, const NoiseSchedule& sched, Tensor x,
                     const prompt::PromptBundle& pb, const Tensor* condition,
                     RandomStream* rng, const SampleOptions& opts = {});

// Full pipeline: x_T ~ N(0,1), reverse loop, decode.
Tensor sample(Denoiser& den, LatentCodec& codec, const NoiseSchedule& sched,
              const std::vector<int>& latent_shape,
              const prompt::PromptBundle& pb, const Tensor* condition,
              RandomStream& rng, const SampleOptions& opts = {});

void write_loss_csv(const std::string& path,
                    const std::vector<double>& losses);

} // namespace railgen::diffusion
