#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>

#include "railgen/core/error.hpp"
#include "railgen/core/rng.hpp"
#include "railgen/diffusion/codec.hpp"
#include "railgen/diffusion/schedule.hpp"
#include "railgen/diffusion/train.hpp"
#include "railgen/diffusion/unet.hpp"

using namespace railgen;
using namespace railgen::diffusion;

namespace {

std::string thrown_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

// Denoiser that replays a prerecorded noise tensor per timestep.
class ReplayDenoiser : public Denoiser {
public:
  std::map<int, Tensor> eps_by_t;
  Tensor predict(const Tensor&, int t, const std::string&,
                 const Tensor*) override {
    return eps_by_t.at(t);
  }
};

// Denoiser returning the input scaled by a constant.
class ScaleDenoiser : public Denoiser {
public:
  explicit ScaleDenoiser(float k) : k_(k) {}
  Tensor predict(const Tensor& x, int, const std::string&,
                 const Tensor*) override {
    Tensor out(x.shape());
    for (size_t i = 0; i < x.size(); ++i)
      out[i] = k_ * x[i];
    return out;
  }

private:
  float k_;
};

// Denoiser returning a constant that depends only on the prompt string.
class PromptConstDenoiser : public Denoiser {
public:
  std::map<std::string, float> value;
  Tensor predict(const Tensor& x, int, const std::string& prompt,
                 const Tensor*) override {
    return Tensor(x.shape(), value.at(prompt));
  }
};

class NanDenoiser : public Denoiser {
public:
  Tensor predict(const Tensor& x, int, const std::string&,
                 const Tensor*) override {
    return Tensor(x.shape(), std::numeric_limits<float>::quiet_NaN());
  }
};

Tensor random_tensor(const std::vector<int>& shape, uint64_t seed) {
  RandomStream rng(seed);
  Tensor t(shape);
  for (size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(rng.normal());
  return t;
}

std::vector<TrainItem> toy_batch(int n, uint64_t seed) {
  std::vector<TrainItem> items;
  for (int i = 0; i < n; ++i) {
    TrainItem it;
    it.x0 = random_tensor({1, 8, 8}, seed + static_cast<uint64_t>(i));
    for (size_t k = 0; k < it.x0.size(); ++k)
      it.x0[k] = std::tanh(it.x0[k]); // keep inside [-1,1]
    it.prompt = "a railway scene";
    items.push_back(std::move(it));
  }
  return items;
}

UNetDenoiser::Config tiny_cfg() {
  UNetDenoiser::Config cfg;
  cfg.in_ch = 1;
  cfg.width = 4;
  cfg.emb_dim = 8;
  cfg.prompt_buckets = 8;
  return cfg;
}

} // namespace

TEST_CASE("linear schedule matches its closed form") {
  auto s = make_schedule("linear", 10, 1e-4, 0.02);
  REQUIRE(s.T == 10);
  REQUIRE(s.betas.size() == 10);
  CHECK(s.kind == "linear");

  for (int t = 1; t <= 10; ++t) {
    double want = 1e-4 + (t - 1) / 9.0 * (0.02 - 1e-4);
    CHECK(s.beta(t) == doctest::Approx(want).epsilon(1e-14));
    CHECK(s.beta(t) > 0.0);
    CHECK(s.beta(t) < 1.0);
  }
  CHECK(s.beta(5) == doctest::Approx(0.0089444).epsilon(1e-5));
  CHECK(s.beta(1) == 1e-4);
  CHECK(s.beta(10) == 0.02);
}

TEST_CASE("degenerate and invalid schedules") {
  auto one = make_schedule("linear", 1, 1e-4, 0.02);
  REQUIRE(one.betas.size() == 1);
  CHECK(one.betas[0] == 1e-4);

  CHECK(thrown_code([] { make_schedule("linear", 10, 1e-4, 1.0); }) ==
        "InvalidSchedule");
  CHECK(thrown_code([] { make_schedule("linear", 10, 0.0, 0.02); }) ==
        "InvalidSchedule");
  CHECK(thrown_code([] { make_schedule("linear", 10, 0.03, 0.02); }) ==
        "InvalidSchedule");
  CHECK(thrown_code([] { make_schedule("linear", 0, 1e-4, 0.02); }) ==
        "InvalidSchedule");
  CHECK(thrown_code([] { make_schedule("cosine", 10, 1e-4, 0.02); }) ==
        "InvalidSchedule");
}

TEST_CASE("forward step evaluates its formula") {
  double x = 1.0, eps = 0.5, beta = 0.19;
  double out;
  forward_step<double>({&x, 1}, beta, {&eps, 1}, {&out, 1});
  CHECK(out == doctest::Approx(1.1179449).epsilon(1e-6));
  CHECK(out == doctest::Approx(std::sqrt(0.81) + std::sqrt(0.19) * 0.5)
                   .epsilon(1e-14));

  // no-noise limit
  double x2 = 0.5, eps2 = 3.0, out2;
  forward_step<double>({&x2, 1}, 1e-12, {&eps2, 1}, {&out2, 1});
  CHECK(out2 == doctest::Approx(0.5).epsilon(1e-5));

  // full-noise case: beta = 1 passes everything through to eps
  double out3;
  forward_step<double>({&x2, 1}, 1.0, {&eps2, 1}, {&out3, 1});
  CHECK(out3 == 3.0);
}

TEST_CASE("reverse step inverts the forward example and guards beta=1") {
  double xt = 1.1179449471770337, eps = 0.5, out;
  reverse_step<double>({&xt, 1}, {&eps, 1}, 0.19, {&out, 1});
  CHECK(out == doctest::Approx(1.0).epsilon(1e-6));

  CHECK(thrown_code([&] {
          double o;
          reverse_step<double>({&xt, 1}, {&eps, 1}, 1.0, {&o, 1});
        }) == "DivisionByZeroGuard");
  CHECK(thrown_code([&] {
          double o;
          reverse_step<double>({&xt, 1}, {&eps, 1}, 0.0, {&o, 1});
        }) == "InvalidSchedule");
}

TEST_CASE("reverse after forward recovers the input to 1e-9 over 1e4 triples") {
  RandomStream rng(99);
  auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double x = rng.normal() * 2.0;
    double eps = rng.normal();
    double beta = 1e-6 + rng.uniform() * (0.99 - 1e-6);
    double xt, back;
    forward_step<double>({&x, 1}, beta, {&eps, 1}, {&xt, 1});
    reverse_step<double>({&xt, 1}, {&eps, 1}, beta, {&back, 1});
    worst = std::max(worst, std::abs(back - x));
  }
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start)
                  .count();
  CHECK(worst <= 1e-9);
  CHECK(secs < 5.0);
}

TEST_CASE("forward step preserves unit variance") {
  RandomStream rng(7);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    double eps = rng.normal();
    double beta = 0.01 + rng.uniform() * 0.97;
    double out;
    forward_step<double>({&x, 1}, beta, {&eps, 1}, {&out, 1});
    sum += out;
    sumsq += out * out;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(var >= 0.97);
  CHECK(var <= 1.03);
}

TEST_CASE("dm loss hand cases") {
  std::vector<double> a = {1.0, -1.0}, b = {0.0, 0.0};
  CHECK(dm_loss<double>(a, a) == 0.0);
  CHECK(dm_loss<double>(a, b) == 1.0);

  RandomStream rng(5);
  std::vector<double> p(16), q(16);
  for (auto& v : p) v = rng.normal();
  for (auto& v : q) v = rng.normal();
  CHECK(dm_loss<double>(p, q) == dm_loss<double>(q, p));

  std::vector<double> shorter = {1.0};
  CHECK(thrown_code([&] { dm_loss<double>(p, shorter); }) == "ShapeError");
  std::vector<double> empty;
  CHECK(thrown_code([&] { dm_loss<double>(empty, empty); }) == "ShapeError");
}

TEST_CASE("tensor wrappers agree with the scalar kernels") {
  Tensor x = random_tensor({2, 3, 3}, 60);
  Tensor eps = random_tensor({2, 3, 3}, 61);
  double beta = 0.3;

  Tensor xt = forward_step(x, beta, eps);
  Tensor back = reverse_step(xt, eps, beta);
  for (size_t i = 0; i < x.size(); ++i) {
    float want = static_cast<float>(std::sqrt(1 - beta)) * x[i] +
                 static_cast<float>(std::sqrt(beta)) * eps[i];
    CHECK(xt[i] == doctest::Approx(want).epsilon(1e-6));
    CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-5));
  }
  CHECK(dm_loss(x, x) == 0.0);

  Tensor wrong({2, 3, 4});
  CHECK(thrown_code([&] { forward_step(x, beta, wrong); }) == "ShapeError");
  CHECK(thrown_code([&] { reverse_step(x, wrong, beta); }) == "ShapeError");
  CHECK(thrown_code([&] { dm_loss(x, wrong); }) == "ShapeError");
}

TEST_CASE("trainer is deterministic and rejects empty batches") {
  auto sched = make_schedule("linear", 10, 1e-4, 0.02);
  auto batch = toy_batch(2, 100);

  auto run = [&](uint64_t seed) {
    UNetDenoiser den(tiny_cfg(), 42);
    IdentityCodec codec;
    DiffusionTrainer tr(den, codec, sched, 1e-2f);
    RandomStream rng(seed);
    for (int i = 0; i < 20; ++i)
      tr.step(batch, rng);
    return tr.losses();
  };

  auto l1 = run(9), l2 = run(9), l3 = run(10);
  REQUIRE(l1.size() == 20);
  for (size_t i = 0; i < l1.size(); ++i)
    CHECK(l1[i] == doctest::Approx(l2[i]).epsilon(1e-6));
  CHECK(l1 != l3);

  UNetDenoiser den(tiny_cfg(), 42);
  IdentityCodec codec;
  DiffusionTrainer tr(den, codec, sched, 1e-2f);
  RandomStream rng(1);
  CHECK(thrown_code([&] {
          tr.step(std::span<const TrainItem>{}, rng);
        }) == "InvalidArgument");
}

TEST_CASE("training never touches frozen groups") {
  auto sched = make_schedule("linear", 10, 1e-4, 0.02);
  auto batch = toy_batch(2, 200);

  UNetDenoiser den(tiny_cfg(), 7);
  for (auto& g : den.groups())
    g.frozen = true;
  uint64_t before = nn::content_hash(den.groups());

  IdentityCodec codec;
  DiffusionTrainer tr(den, codec, sched, 1e-2f);
  RandomStream rng(3);
  for (int i = 0; i < 5; ++i) {
    double loss = tr.step(batch, rng);
    CHECK(std::isfinite(loss));
  }
  CHECK(nn::content_hash(den.groups()) == before);
}

TEST_CASE("two hundred training steps reduce the loss") {
  auto sched = make_schedule("linear", 10, 1e-4, 0.02);
  auto batch = toy_batch(2, 300);

  UNetDenoiser den(tiny_cfg(), 11);
  IdentityCodec codec;
  DiffusionTrainer tr(den, codec, sched, 1e-2f);
  RandomStream rng(17);
  for (int i = 0; i < 200; ++i)
    tr.step(batch, rng);

  const auto& l = tr.losses();
  REQUIRE(l.size() == 200);
  double first = 0, last = 0;
  for (int i = 0; i < 50; ++i) {
    first += l[static_cast<size_t>(i)];
    last += l[static_cast<size_t>(150 + i)];
  }
  CHECK(last / 50.0 < first / 50.0);
  CHECK(tr.steps_taken() == 200);
}

TEST_CASE("sampler recovers a planted clean image from its noise record") {
  auto sched = make_schedule("linear", 10, 1e-4, 0.02);
  Tensor x0 = random_tensor({1, 6, 6}, 500);
  for (size_t i = 0; i < x0.size(); ++i)
    x0[i] = std::tanh(x0[i]);

  ReplayDenoiser oracle;
  RandomStream rng(501);
  Tensor x = x0;
  for (int t = 1; t <= sched.T; ++t) {
    Tensor eps = gaussian_tensor(x.shape(), rng);
    x = forward_step(x, sched.beta(t), eps);
    oracle.eps_by_t[t] = eps;
  }

  prompt::PromptBundle pb;
  Tensor rec = sample_latent(oracle, sched, x, pb, nullptr, nullptr);
  double worst = 0;
  for (size_t i = 0; i < x0.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(rec[i]) - x0[i]));
  CHECK(worst <= 1e-6);
}

TEST_CASE("single-step sampler with a constructed denoiser lands on zero") {
  auto sched = make_schedule("linear", 1, 0.5, 0.6);
  REQUIRE(sched.betas[0] == 0.5);

  Tensor xT = random_tensor({1, 4, 4}, 502);
  ScaleDenoiser den(static_cast<float>(1.0 / std::sqrt(0.5)));
  prompt::PromptBundle pb;
  Tensor out = sample_latent(den, sched, xT, pb, nullptr, nullptr);
  for (size_t i = 0; i < out.size(); ++i)
    CHECK(std::abs(out[i]) <= 1e-6);
}

TEST_CASE("sampling twice with one seed gives identical bytes") {
  auto sched = make_schedule("linear", 10, 1e-4, 0.02);
  prompt::PromptBundle pb;
  pb.positive = "a railway scene";
  IdentityCodec codec;

  auto draw = [&](uint64_t seed) {
    UNetDenoiser den(tiny_cfg(), 77);
    RandomStream rng(seed);
    return sample(den, codec, sched, {1, 8, 8}, pb, nullptr, rng);
  };
  Tensor a = draw(4), b = draw(4), c = draw(5);
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(a.data(), c.data(), a.size() * sizeof(float)) != 0);
}

TEST_CASE("non-finite predictions abort sampling with the offending step") {
  auto sched = make_schedule("linear", 5, 1e-4, 0.02);
  NanDenoiser den;
  prompt::PromptBundle pb;
  Tensor xT = random_tensor({1, 4, 4}, 503);
  try {
    sample_latent(den, sched, xT, pb, nullptr, nullptr);
    FAIL("expected NonFiniteSample");
  } catch (const Error& e) {
    CHECK(e.code() == "NonFiniteSample");
    CHECK(std::string(e.what()).find("t=5") != std::string::npos);
  }
}

TEST_CASE("negative prompts steer predictions only when enabled") {
  auto sched = make_schedule("linear", 1, 0.5, 0.6);
  PromptConstDenoiser den;
  den.value["pos"] = 1.0f;
  den.value["neg"] = 0.0f;
  Tensor xT({1, 2, 2}, 2.0f);

  auto run = [&](bool neg_on, double guidance) {
    prompt::PromptBundle pb;
    pb.positive = "pos";
    pb.negative = "neg";
    pb.negatives_on = neg_on;
    SampleOptions opts;
    opts.guidance = guidance;
    return sample_latent(den, sched, xT, pb, nullptr, nullptr, opts);
  };

  const double b = 0.5;
  auto expect = [&](double eps_hat) {
    return (2.0 - std::sqrt(b) * eps_hat) / std::sqrt(1.0 - b);
  };

  // steering on: eps_hat = neg + g*(pos - neg) = 0 + 2*1 = 2
  Tensor steered = run(true, 2.0);
  CHECK(steered[0] == doctest::Approx(expect(2.0)).epsilon(1e-5));
  // steering off: plain positive prediction
  Tensor plain = run(false, 2.0);
  CHECK(plain[0] == doctest::Approx(expect(1.0)).epsilon(1e-5));
  // guidance 1 collapses to the positive prediction as well
  Tensor unit = run(true, 1.0);
  CHECK(unit[0] == doctest::Approx(expect(1.0)).epsilon(1e-5));
}

TEST_CASE("identity codec is exact and the tiny autoencoder learns") {
  IdentityCodec id;
  Tensor img = random_tensor({3, 8, 8}, 504);
  Tensor lat = id.encode(img);
  Tensor back = id.decode(lat);
  REQUIRE(back.size() == img.size());
  CHECK(std::memcmp(back.data(), img.data(), img.size() * sizeof(float)) == 0);
  CHECK(id.latent_shape({3, 64, 64}) == std::vector<int>{3, 64, 64});

  TinyAutoencoder ae(3, 8, 4, 1234);
  CHECK(ae.latent_shape({3, 16, 16}) == std::vector<int>{4, 8, 8});
  CHECK(thrown_code([&] { ae.latent_shape({3, 15, 16}); }) == "ShapeError");

  std::vector<Tensor> imgs;
  for (uint64_t i = 0; i < 2; ++i) {
    Tensor t = random_tensor({3, 16, 16}, 600 + i);
    for (size_t k = 0; k < t.size(); ++k)
      t[k] = std::tanh(t[k]);
    imgs.push_back(std::move(t));
  }
  double early = train_codec(ae, imgs, 1, 1e-2f);
  double late = train_codec(ae, imgs, 40, 1e-2f);
  CHECK(std::isfinite(early));
  CHECK(late < early);

  Tensor z = ae.encode(imgs[0]);
  CHECK(z.shape() == std::vector<int>{4, 8, 8});
  CHECK(ae.decode(z).shape() == imgs[0].shape());
}
