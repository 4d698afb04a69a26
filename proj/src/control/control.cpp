#include "railgen/control/control.hpp"

#include <algorithm>

#include "railgen/core/hash.hpp"
#include "railgen/nn/checkpoint.hpp"

namespace railgen::control {

using diffusion::EncoderStack;

ConditionEncoder::ConditionEncoder(std::vector<int> cond_shape,
                                   std::vector<int> latent_shape, int width,
                                   uint64_t seed)
    : cond_shape_(std::move(cond_shape)), latent_shape_(std::move(latent_shape)) {
  if (cond_shape_.size() != 3 || cond_shape_[0] != 3)
    fail("InvalidArgument", "condition shape must be (3,H,W)");
  if (latent_shape_.size() != 3)
    fail("InvalidArgument", "latent shape must be (C,H,W)");
  const int ch = cond_shape_[1], cw = cond_shape_[2];
  const int lh = latent_shape_[1], lw = latent_shape_[2];
  if (ch % lh != 0 || cw % lw != 0 || ch / lh != cw / lw)
    fail("InvalidArgument", "condition dims must be a uniform multiple of latent dims");
  int ratio = ch / lh;
  int n = 0;
  while (ratio > 1) {
    if (ratio % 2 != 0)
      fail("InvalidArgument", "condition/latent ratio must be a power of two");
    ratio /= 2;
    ++n;
  }

  RandomStream rng(derive_seed(seed, "cond-encoder-init"));
  stem_ = nn::Conv2d(3, width, 3);
  stem_.init(rng);
  stage_.reserve(n);
  stage_act_.resize(n);
  for (int i = 0; i < n; ++i) {
    stage_.emplace_back(width, width, 3, 2);
    stage_.back().init(rng);
  }
  out_ = nn::Conv2d(width, latent_shape_[0], 3);
  out_.zero_init();
}

Tensor ConditionEncoder::forward(const Tensor& condition) {
  if (condition.shape() != cond_shape_)
    fail("ShapeError", "condition does not match the declared shape");
  Tensor h = stem_act_.forward(stem_.forward(condition));
  for (size_t i = 0; i < stage_.size(); ++i)
    h = stage_act_[i].forward(stage_[i].forward(h));
  return out_.forward(h);
}

Tensor ConditionEncoder::backward(const Tensor& dy) {
  Tensor g = out_.backward(dy);
  for (size_t i = stage_.size(); i-- > 0;)
    g = stage_[i].backward(stage_act_[i].backward(g));
  return stem_.backward(stem_act_.backward(g));
}

void ConditionEncoder::collect_group(const std::string& name,
                                     std::vector<nn::ParamGroup>& out) {
  nn::ParamGroup g{name, false, {}};
  stem_.collect(name + ".stem", g.params);
  for (size_t i = 0; i < stage_.size(); ++i)
    stage_[i].collect(name + ".stage" + std::to_string(i), g.params);
  out_.collect(name + ".out", g.params);
  out.push_back(std::move(g));
}

namespace {

int parse_block_index(const std::string& name) {
  for (int i = 0; i < 4; ++i)
    if (name == "enc" + std::to_string(i)) return i;
  fail("UnknownBlock", "no such block: " + name);
}

} // namespace

ControlledDenoiser::ControlledDenoiser(
    std::shared_ptr<diffusion::UNetDenoiser> base,
    const std::vector<std::string>& blocks_to_clone,
    std::vector<int> latent_shape, const Options& opts, uint64_t seed)
    : base_(std::move(base)), blocks_(blocks_to_clone),
      latent_shape_(std::move(latent_shape)), opts_(opts) {
  if (blocks_.empty())
    fail("InvalidArgument", "blocks_to_clone must not be empty");
  std::vector<int> idx;
  for (const auto& b : blocks_) idx.push_back(parse_block_index(b));
  std::sort(idx.begin(), idx.end());
  for (size_t i = 0; i < idx.size(); ++i)
    if (idx[i] != static_cast<int>(i))
      fail("InvalidArgument",
           "blocks_to_clone must form a prefix chain from enc0");
  last_ = idx.back();

  if (latent_shape_.size() != 3 || latent_shape_[0] != base_->config().in_ch)
    fail("ShapeError", "latent shape does not match the base denoiser");

  for (auto& g : base_->groups()) g.frozen = true;
  base_hash_ = nn::content_hash(base_->groups());

  clone_ = base_->encoder_stack();

  const int w = base_->config().width;
  const int chs[4] = {w, 2 * w, 4 * w, 4 * w};
  for (int i = 0; i <= last_; ++i) {
    links_.emplace_back(chs[i], chs[i], 1);
    links_.back().zero_init();
  }

  std::vector<int> cond_shape =
      opts_.cond_shape.empty()
          ? std::vector<int>{3, latent_shape_[1], latent_shape_[2]}
          : opts_.cond_shape;
  encoder_ = ConditionEncoder(cond_shape, latent_shape_, opts_.encoder_width,
                              seed);

  for (const auto& g : base_->groups()) groups_.push_back(g);
  clone_.collect_groups("clone_enc", false, last_, groups_);
  nn::ParamGroup gl{"zero_links", false, {}};
  for (int i = 0; i <= last_; ++i)
    links_[i].collect("zero_links.link" + std::to_string(i), gl.params);
  groups_.push_back(std::move(gl));
  encoder_.collect_group("cond_enc", groups_);

  zero_pemb_.setZero(base_->config().emb_dim);
  d_pemb_sink_.setZero(base_->config().emb_dim);
}

Tensor ControlledDenoiser::predict(const Tensor& x_t, int t,
                                   const std::string& prompt,
                                   const Tensor* condition) {
  if (!condition)
    fail("MissingCondition", "controlled denoiser needs a condition image");
  if (x_t.shape() != latent_shape_)
    fail("ShapeError", "x_t does not match the declared latent shape");

  base_->prepare(t, prompt);
  Tensor clone_in = add(x_t, encoder_.forward(*condition));

  EncoderStack::Out junctions = base_->encode(x_t);
  const nn::VectorXf& cpemb =
      opts_.clone_gets_prompt ? base_->pemb() : zero_pemb_;
  EncoderStack::Out clone_out =
      clone_.forward(clone_in, base_->temb(), cpemb, last_);
  for (int i = 0; i <= last_; ++i)
    add_inplace(junctions.e[i], links_[i].forward(clone_out.e[i]));
  return base_->decode(junctions);
}

void ControlledDenoiser::backward(const Tensor& d_eps_hat) {
  EncoderStack::Out dj = base_->decode_backward(d_eps_hat);
  EncoderStack::Out dclone;
  for (int i = 0; i <= last_; ++i)
    dclone.e[i] = links_[i].backward(dj.e[i]);
  // the clone's prompt-bias gradient targets the frozen base table; drop it
  d_pemb_sink_.setZero(base_->config().emb_dim);
  Tensor dx_clone = clone_.backward(dclone, d_pemb_sink_, last_);
  encoder_.backward(dx_clone);
}

std::vector<nn::ParamGroup> ControlledDenoiser::trainable_groups() {
  std::vector<nn::ParamGroup> out;
  for (const auto& g : groups_)
    if (!g.frozen) out.push_back(g);
  return out;
}

std::unique_ptr<ControlledDenoiser> attach_control(
    std::shared_ptr<diffusion::UNetDenoiser> base,
    const std::vector<std::string>& blocks_to_clone,
    std::vector<int> latent_shape, const ControlledDenoiser::Options& opts,
    uint64_t seed) {
  return std::make_unique<ControlledDenoiser>(
      std::move(base), blocks_to_clone, std::move(latent_shape), opts, seed);
}

double control_training_step(diffusion::DiffusionTrainer& trainer,
                             std::span<const diffusion::TrainItem> batch,
                             RandomStream& rng) {
  for (const auto& item : batch)
    if (!item.condition)
      fail("MissingCondition", "control training item lacks a condition");
  return trainer.step(batch, rng);
}

void save_control_checkpoint(const std::string& path, ControlledDenoiser& cd,
                             const nlohmann::json& extra_meta) {
  nlohmann::json meta = extra_meta;
  meta["base_hash"] = to_hex(nn::content_hash(cd.base().groups()));
  meta["blocks"] = cd.cloned_blocks();
  meta["latent_shape"] = cd.latent_shape();
  meta["encoder_width"] = cd.options().encoder_width;
  meta["clone_gets_prompt"] = cd.options().clone_gets_prompt;
  auto groups = cd.trainable_groups();
  nn::save_checkpoint(path, groups, meta);
}

nlohmann::json load_control_checkpoint(const std::string& path,
                                       ControlledDenoiser& cd) {
  auto groups = cd.trainable_groups();
  nlohmann::json meta = nn::load_checkpoint(path, groups);
  const std::string want = to_hex(nn::content_hash(cd.base().groups()));
  if (meta["base_hash"].get<std::string>() != want)
    fail("BaseHashMismatch",
         "control checkpoint was trained against a different base");
  return meta;
}

} // namespace railgen::control
