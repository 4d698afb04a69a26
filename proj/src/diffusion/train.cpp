#include "railgen/diffusion/train.hpp"

#include <cmath>
#include <fstream>

namespace railgen::diffusion {

Tensor gaussian_tensor(const std::vector<int>& shape, RandomStream& rng) {
  Tensor t(shape);
  for (size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(rng.normal());
  return t;
}

DiffusionTrainer::DiffusionTrainer(Denoiser& den, LatentCodec& codec,
                                   NoiseSchedule sched, float lr)
    : den_(den), codec_(codec), sched_(std::move(sched)), opt_(lr) {}

double DiffusionTrainer::step(std::span<const TrainItem> batch,
                              RandomStream& rng) {
  if (batch.empty()) fail("InvalidArgument", "training batch is empty");
  nn::Adam::zero_grad(den_.groups());

  double total = 0.0;
  for (const auto& item : batch) {
    Tensor x = codec_.encode(item.x0);
    const int t = static_cast<int>(rng.uniform_int(1, sched_.T));
    Tensor eps;
    for (int k = 1; k <= t; ++k) {
      eps = gaussian_tensor(x.shape(), rng);
      x = forward_step(x, sched_.beta(k), eps);
    }
    Tensor eps_hat = den_.predict(x, t, item.prompt, item.condition);
    total += dm_loss(eps, eps_hat);

    Tensor d(eps_hat.shape());
    const float scale =
        2.0f / (static_cast<float>(eps_hat.size()) * batch.size());
    for (size_t i = 0; i < d.size(); ++i)
      d[i] = scale * (eps_hat[i] - eps[i]);
    den_.backward(d);
  }
  const double loss = total / static_cast<double>(batch.size());
  if (!std::isfinite(loss))
    fail("NonFiniteLoss",
         "non-finite loss at step " + std::to_string(steps_taken()));

  opt_.step(den_.groups());
  losses_.push_back(loss);
  return loss;
}

namespace {

Tensor predict_guided(Denoiser& den, const Tensor& x, int t,
                      const prompt::PromptBundle& pb, const Tensor* condition,
                      const SampleOptions& opts) {
  const bool steer = pb.negatives_on && !pb.negative.empty() &&
                     opts.guidance != 1.0;
  Tensor pos = den.predict(x, t, pb.positive, condition);
  if (!steer) return pos;
  Tensor neg = den.predict(x, t, pb.negative, condition);
  Tensor out(pos.shape());
  const float g = static_cast<float>(opts.guidance);
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = neg[i] + g * (pos[i] - neg[i]);
  return out;
}

} // namespace

Tensor sample_latent(Denoiser& den, const NoiseSchedule& sched, Tensor x,
                     const prompt::PromptBundle& pb, const Tensor* condition,
                     RandomStream* rng, const SampleOptions& opts) {
  for (int t = sched.T; t >= 1; --t) {
    Tensor eps_hat = predict_guided(den, x, t, pb, condition, opts);
    x = reverse_step(x, eps_hat, sched.beta(t));
    if (opts.stochastic && t > 1) {
      if (!rng) fail("InvalidArgument", "stochastic sampling needs an rng");
      Tensor z = gaussian_tensor(x.shape(), *rng);
      const float s = static_cast<float>(std::sqrt(sched.beta(t)));
      for (size_t i = 0; i < x.size(); ++i) x[i] += s * z[i];
    }
    if (!x.all_finite())
      fail("NonFiniteSample",
           "non-finite sample at t=" + std::to_string(t));
  }
  return x;
}

Tensor sample(Denoiser& den, LatentCodec& codec, const NoiseSchedule& sched,
              const std::vector<int>& latent_shape,
              const prompt::PromptBundle& pb, const Tensor* condition,
              RandomStream& rng, const SampleOptions& opts) {
  Tensor x = gaussian_tensor(latent_shape, rng);
  x = sample_latent(den, sched, std::move(x), pb, condition,
                    opts.stochastic ? &rng : nullptr, opts);
  return codec.decode(x);
}

void write_loss_csv(const std::string& path,
                    const std::vector<double>& losses) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail("IoError", "cannot write loss curve: " + path);
  os << "step,loss\n";
  for (size_t i = 0; i < losses.size(); ++i)
    os << i << "," << losses[i] << "\n";
}

} // namespace railgen::diffusion
