#pragma once

#include <json.hpp>
#include <memory>

#include "railgen/diffusion/train.hpp"
#include "railgen/diffusion/unet.hpp"

namespace railgen::control {

// Small convolutional network mapping a normalized [0,1] condition image
// onto the denoiser's latent shape. One stride-2 stage per halving between
// condition and latent resolution; the output conv starts at zero so a
// freshly attached branch cannot disturb the base.
class ConditionEncoder {
public:
  ConditionEncoder() = default;
  ConditionEncoder(std::vector<int> cond_shape, std::vector<int> latent_shape,
                   int width, uint64_t seed);

  Tensor forward(const Tensor& condition);
  Tensor backward(const Tensor& dy);
  void collect_group(const std::string& name,
                     std::vector<nn::ParamGroup>& out);

  const std::vector<int>& cond_shape() const { return cond_shape_; }
  const std::vector<int>& latent_shape() const { return latent_shape_; }
  int stages() const { return static_cast<int>(stage_.size()); }

private:
  std::vector<int> cond_shape_, latent_shape_;
  nn::Conv2d stem_;
  nn::SiLU stem_act_;
  std::vector<nn::Conv2d> stage_;
  std::vector<nn::SiLU> stage_act_;
  nn::Conv2d out_;
};

// Frozen base denoiser plus a trainable clone of its encoder prefix. The
// clone sees x_t + E(condition); its level outputs re-enter the base
// decoder through zero-initialized 1x1 convs at the skip junctions.
class ControlledDenoiser : public diffusion::Denoiser {
public:
  struct Options {
    std::vector<int> cond_shape;  // defaults to the latent shape
    int encoder_width = 8;
    bool clone_gets_prompt = true;  // else the clone sees a zero embedding
  };

  ControlledDenoiser(std::shared_ptr<diffusion::UNetDenoiser> base,
                     const std::vector<std::string>& blocks_to_clone,
                     std::vector<int> latent_shape, const Options& opts,
                     uint64_t seed);

  Tensor predict(const Tensor& x_t, int t, const std::string& prompt,
                 const Tensor* condition) override;
  void backward(const Tensor& d_eps_hat) override;

  std::vector<nn::ParamGroup> trainable_groups();
  diffusion::UNetDenoiser& base() { return *base_; }
  uint64_t base_hash() const { return base_hash_; }
  const std::vector<std::string>& cloned_blocks() const { return blocks_; }
  const std::vector<int>& latent_shape() const { return latent_shape_; }
  const Options& options() const { return opts_; }
  nn::Conv2d& zero_link(int level) { return links_[level]; }

private:
  std::shared_ptr<diffusion::UNetDenoiser> base_;
  std::vector<std::string> blocks_;
  int last_ = 3;  // highest cloned level index
  std::vector<int> latent_shape_;
  Options opts_;
  uint64_t base_hash_ = 0;

  diffusion::EncoderStack clone_;
  std::vector<nn::Conv2d> links_;  // one per cloned level
  ConditionEncoder encoder_;
  nn::VectorXf zero_pemb_, d_pemb_sink_;
};

// Freezes the base in place and wraps it. Valid block names are the
// encoder levels enc0..enc3; the cloned set must be a prefix chain.
std::unique_ptr<ControlledDenoiser> attach_control(
    std::shared_ptr<diffusion::UNetDenoiser> base,
    const std::vector<std::string>& blocks_to_clone,
    std::vector<int> latent_shape, const ControlledDenoiser::Options& opts,
    uint64_t seed);

// training_step with the additional guarantee that every item carries a
// condition; updates reach only clone, zero links, and condition encoder.
double control_training_step(diffusion::DiffusionTrainer& trainer,
                             std::span<const diffusion::TrainItem> batch,
                             RandomStream& rng);

// Control checkpoints persist only the trainable groups plus the content
// hash of the base they were attached to; loading verifies that hash.
void save_control_checkpoint(const std::string& path, ControlledDenoiser& cd,
                             const nlohmann::json& extra_meta);
nlohmann::json load_control_checkpoint(const std::string& path,
                                       ControlledDenoiser& cd);

} // namespace railgen::control
