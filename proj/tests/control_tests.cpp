#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>

#include "railgen/control/control.hpp"
#include "railgen/core/error.hpp"
#include "railgen/diffusion/codec.hpp"
#include "railgen/diffusion/train.hpp"

using namespace railgen;
using namespace railgen::control;
using diffusion::DiffusionTrainer;
using diffusion::IdentityCodec;
using diffusion::TrainItem;
using diffusion::UNetDenoiser;
namespace fs = std::filesystem;

namespace {

std::string thrown_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

UNetDenoiser::Config tiny_cfg() {
  UNetDenoiser::Config cfg;
  cfg.in_ch = 1;
  cfg.width = 4;
  cfg.emb_dim = 8;
  cfg.prompt_buckets = 8;
  return cfg;
}

Tensor random_tensor(const std::vector<int>& shape, uint64_t seed,
                     bool unit_range = false) {
  RandomStream rng(seed);
  Tensor t(shape);
  for (size_t i = 0; i < t.size(); ++i) {
    float v = static_cast<float>(rng.normal());
    t[i] = unit_range ? std::abs(std::tanh(v)) : v;
  }
  return t;
}

const std::vector<int> kLatent = {1, 8, 8};
const std::vector<std::string> kAllBlocks = {"enc0", "enc1", "enc2", "enc3"};

std::unique_ptr<ControlledDenoiser> make_cd(uint64_t base_seed,
                                            uint64_t ctl_seed) {
  auto base = std::make_shared<UNetDenoiser>(tiny_cfg(), base_seed);
  return attach_control(base, kAllBlocks, kLatent, {}, ctl_seed);
}

struct ToyFixture {
  std::vector<Tensor> conds;
  std::vector<TrainItem> batch;

  explicit ToyFixture(int n, uint64_t seed) {
    conds.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      conds.push_back(
          random_tensor({3, 8, 8}, seed + 50 + static_cast<uint64_t>(i), true));
    for (int i = 0; i < n; ++i) {
      TrainItem it;
      it.x0 = random_tensor({1, 8, 8}, seed + static_cast<uint64_t>(i));
      for (size_t k = 0; k < it.x0.size(); ++k)
        it.x0[k] = std::tanh(it.x0[k]);
      it.prompt = "a railway scene";
      it.condition = &conds[static_cast<size_t>(i)];
      batch.push_back(std::move(it));
    }
  }
};

} // namespace

TEST_CASE("fresh control branch is an exact no-op on the base") {
  auto base = std::make_shared<UNetDenoiser>(tiny_cfg(), 42);
  auto cd = attach_control(base, kAllBlocks, kLatent, {}, 7);

  for (uint64_t i = 0; i < 50; ++i) {
    Tensor x = random_tensor(kLatent, 1000 + i);
    Tensor cond = random_tensor({3, 8, 8}, 2000 + i, true);
    int t = static_cast<int>(i % 10) + 1;
    Tensor a = cd->predict(x, t, "p", &cond);
    Tensor b = base->predict(x, t, "p", nullptr);
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k)
      CHECK(std::abs(a[k] - b[k]) <= 1e-6f);
  }
}

TEST_CASE("attaching twice with one seed clones identically") {
  auto cd1 = make_cd(42, 7);
  auto cd2 = make_cd(42, 7);
  CHECK(nn::content_hash(cd1->groups()) == nn::content_hash(cd2->groups()));
  CHECK(cd1->base_hash() == cd2->base_hash());

  auto cd3 = make_cd(42, 8);
  CHECK(nn::content_hash(cd1->groups()) != nn::content_hash(cd3->groups()));
}

TEST_CASE("attachment validates block names and the prefix rule") {
  auto base = std::make_shared<UNetDenoiser>(tiny_cfg(), 1);
  CHECK(thrown_code([&] {
          attach_control(base, {"nonexistent"}, kLatent, {}, 1);
        }) == "UnknownBlock");
  CHECK(thrown_code([&] {
          attach_control(base, {"enc4"}, kLatent, {}, 1);
        }) == "UnknownBlock");
  CHECK(thrown_code([&] {
          attach_control(base, {"enc1", "enc2"}, kLatent, {}, 1);
        }) == "InvalidArgument");
  CHECK(thrown_code([&] {
          attach_control(base, {}, kLatent, {}, 1);
        }) == "InvalidArgument");

  // a strict prefix is allowed
  auto cd = attach_control(base, {"enc0", "enc1"}, kLatent, {}, 1);
  CHECK(cd->cloned_blocks().size() == 2);
  Tensor x = random_tensor(kLatent, 3);
  Tensor cond = random_tensor({3, 8, 8}, 4, true);
  Tensor y = cd->predict(x, 1, "p", &cond);
  CHECK(y.shape() == kLatent);
}

TEST_CASE("base groups freeze on attach and stay frozen through training") {
  auto base = std::make_shared<UNetDenoiser>(tiny_cfg(), 9);
  auto cd = attach_control(base, kAllBlocks, kLatent, {}, 3);
  for (const auto& g : base->groups())
    CHECK(g.frozen);
  uint64_t before = nn::content_hash(base->groups());

  ToyFixture fix(2, 600);
  IdentityCodec codec;
  auto sched = diffusion::make_schedule("linear", 10, 1e-4, 0.02);
  DiffusionTrainer tr(*cd, codec, sched, 1e-2f);
  RandomStream rng(5);

  int done = 0;
  for (int target : {1, 10, 100}) {
    for (; done < target; ++done)
      control_training_step(tr, fix.batch, rng);
    CHECK(nn::content_hash(base->groups()) == before);
  }

  // learning engaged the branch: some zero link moved off zero
  bool any_nonzero = false;
  for (int lvl = 0; lvl < 4; ++lvl) {
    std::vector<nn::ParamView> views;
    cd->zero_link(lvl).collect("l", views);
    for (const auto& v : views)
      for (size_t i = 0; i < v.size; ++i)
        if (v.value[i] != 0.0f) any_nonzero = true;
  }
  CHECK(any_nonzero);
}

TEST_CASE("control training losses replay exactly under a fixed seed") {
  auto run = [&]() {
    auto cd = make_cd(21, 22);
    ToyFixture fix(2, 700);
    IdentityCodec codec;
    auto sched = diffusion::make_schedule("linear", 10, 1e-4, 0.02);
    DiffusionTrainer tr(*cd, codec, sched, 1e-2f);
    RandomStream rng(23);
    for (int i = 0; i < 15; ++i)
      control_training_step(tr, fix.batch, rng);
    return tr.losses();
  };
  auto l1 = run(), l2 = run();
  REQUIRE(l1.size() == 15);
  for (size_t i = 0; i < l1.size(); ++i)
    CHECK(l1[i] == doctest::Approx(l2[i]).epsilon(1e-6));
}

TEST_CASE("a small zero-link perturbation moves the output a bounded amount") {
  auto base = std::make_shared<UNetDenoiser>(tiny_cfg(), 42);
  auto cd = attach_control(base, kAllBlocks, kLatent, {}, 7);

  std::vector<nn::ParamView> views;
  cd->zero_link(0).collect("l0", views);
  views[0].value[0] = 1e-3f;

  for (uint64_t i = 0; i < 5; ++i) {
    Tensor x = random_tensor(kLatent, 900 + i);
    for (size_t k = 0; k < x.size(); ++k)
      x[k] = std::tanh(x[k]);
    Tensor cond = random_tensor({3, 8, 8}, 950 + i, true);
    Tensor a = cd->predict(x, 3, "p", &cond);
    Tensor b = base->predict(x, 3, "p", nullptr);
    float sup = 0.0f;
    for (size_t k = 0; k < a.size(); ++k)
      sup = std::max(sup, std::abs(a[k] - b[k]));
    CHECK(sup > 0.0f);
    CHECK(sup <= 1e-1f);
  }
}

TEST_CASE("analytic zero-link gradient matches finite differences") {
  auto cd = make_cd(31, 32);
  Tensor x = random_tensor(kLatent, 33);
  Tensor cond = random_tensor({3, 8, 8}, 34, true);
  Tensor dweights = random_tensor(kLatent, 35);

  auto loss = [&]() {
    Tensor y = cd->predict(x, 2, "p", &cond);
    double acc = 0;
    for (size_t i = 0; i < y.size(); ++i)
      acc += static_cast<double>(y[i]) * dweights[i];
    return acc;
  };

  nn::Adam::zero_grad(cd->groups());
  cd->predict(x, 2, "p", &cond);
  cd->backward(dweights);

  std::vector<nn::ParamView> views;
  cd->zero_link(0).collect("l0", views);
  // probe the weight with the largest analytic gradient
  size_t pick = 0;
  for (size_t i = 0; i < views[0].size; ++i)
    if (std::abs(views[0].grad[i]) > std::abs(views[0].grad[pick])) pick = i;
  double analytic = views[0].grad[pick];
  REQUIRE(std::abs(analytic) > 1e-6);

  const double h = 3e-3;
  float* slot = views[0].value + pick;
  float keep = *slot;
  *slot = static_cast<float>(keep + h);
  double hi = loss();
  *slot = static_cast<float>(keep - h);
  double lo = loss();
  *slot = keep;
  double fd = (hi - lo) / (2 * h);
  CHECK(std::abs(fd - analytic) / std::abs(analytic) < 1e-3);
}

TEST_CASE("controlled predictions demand a condition and the right shape") {
  auto cd = make_cd(51, 52);
  Tensor x = random_tensor(kLatent, 53);
  Tensor cond = random_tensor({3, 8, 8}, 54, true);
  CHECK(thrown_code([&] { cd->predict(x, 1, "p", nullptr); }) ==
        "MissingCondition");

  Tensor bad_x = random_tensor({1, 4, 4}, 55);
  CHECK(thrown_code([&] { cd->predict(bad_x, 1, "p", &cond); }) ==
        "ShapeError");

  Tensor bad_cond = random_tensor({3, 4, 8}, 56, true);
  CHECK(thrown_code([&] { cd->predict(x, 1, "p", &bad_cond); }) ==
        "ShapeError");
}

TEST_CASE("control training items must all carry conditions") {
  auto cd = make_cd(61, 62);
  IdentityCodec codec;
  auto sched = diffusion::make_schedule("linear", 10, 1e-4, 0.02);
  DiffusionTrainer tr(*cd, codec, sched, 1e-2f);
  RandomStream rng(63);

  ToyFixture fix(2, 800);
  fix.batch[1].condition = nullptr;
  CHECK(thrown_code([&] { control_training_step(tr, fix.batch, rng); }) ==
        "MissingCondition");
}

TEST_CASE("condition encoder halves resolution per stage down to the latent") {
  ConditionEncoder enc({3, 32, 32}, {4, 4, 4}, 8, 99);
  CHECK(enc.stages() == 3);
  Tensor cond = random_tensor({3, 32, 32}, 100, true);
  Tensor f = enc.forward(cond);
  CHECK(f.shape() == std::vector<int>{4, 4, 4});
  // zero-initialized output conv: whole branch silent at start
  for (size_t i = 0; i < f.size(); ++i)
    CHECK(f[i] == 0.0f);

  Tensor off = random_tensor({3, 31, 32}, 101, true);
  CHECK(thrown_code([&] { enc.forward(off); }) == "ShapeError");

  CHECK(thrown_code([] {
          ConditionEncoder({3, 12, 12}, {4, 4, 4}, 8, 1);
        }) == "InvalidArgument");
  CHECK(thrown_code([] {
          ConditionEncoder({3, 32, 16}, {4, 4, 4}, 8, 1);
        }) == "InvalidArgument");
}

TEST_CASE("control checkpoints restore training state and pin the base") {
  fs::path dir = fs::temp_directory_path() / "railgen-ctl-ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string path = (dir / "ctl.ckpt").string();

  auto cd = make_cd(71, 72);
  {
    ToyFixture fix(2, 900);
    IdentityCodec codec;
    auto sched = diffusion::make_schedule("linear", 10, 1e-4, 0.02);
    DiffusionTrainer tr(*cd, codec, sched, 1e-2f);
    RandomStream rng(73);
    for (int i = 0; i < 10; ++i)
      control_training_step(tr, fix.batch, rng);
  }
  uint64_t trained = nn::content_hash(cd->trainable_groups());
  save_control_checkpoint(path, *cd, {{"scheme", "mask"}});

  auto cd2 = make_cd(71, 72);
  CHECK(nn::content_hash(cd2->trainable_groups()) != trained);
  auto meta = load_control_checkpoint(path, *cd2);
  CHECK(nn::content_hash(cd2->trainable_groups()) == trained);
  CHECK(meta.value("scheme", "") == "mask");
  CHECK(meta["blocks"].size() == 4);

  // same control seed, different base: hash check must fire
  auto cd3 = make_cd(99, 72);
  CHECK(thrown_code([&] { load_control_checkpoint(path, *cd3); }) ==
        "BaseHashMismatch");
}
