#include "railgen/seg/seg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "railgen/core/error.hpp"
#include "railgen/metrics/metrics.hpp"
#include "railgen/nn/optim.hpp"

namespace railgen::seg {

ImageU8 binarize_mask(const ImageU8& class_mask, const std::set<int>& rail_ids,
                      const data::ClassTable& table) {
  if (class_mask.c != 1)
    fail("InvalidMask", "class mask must be single-channel");
  for (int id : rail_ids)
    if (!table.contains(id))
      fail("UnknownClass", "rail id not in class table: " + std::to_string(id));
  ImageU8 out(class_mask.h, class_mask.w, 1);
  for (size_t i = 0; i < class_mask.px.size(); ++i)
    out.px[i] = rail_ids.count(class_mask.px[i]) ? 1 : 0;
  return out;
}

SetupId parse_setup(const std::string& name) {
  if (name.size() == 1 && name[0] >= 'A' && name[0] <= 'F')
    return static_cast<SetupId>(name[0] - 'A');
  fail("InvalidArgument", "unknown setup: " + name);
}

std::string setup_name(SetupId id) {
  return std::string(1, static_cast<char>('A' + static_cast<int>(id)));
}

std::vector<SegSample> build_setup(SetupId id,
                                   const std::vector<SegSample>& real,
                                   const std::vector<SegSample>& synth) {
  if (real.size() != synth.size() || real.empty())
    fail("AlignmentError", "real and synth sets must be same-size and non-empty");
  for (size_t i = 0; i < real.size(); ++i)
    if (real[i].mask_id != synth[i].mask_id)
      fail("AlignmentError",
           "mask_id mismatch at index " + std::to_string(i));
  const size_t n = real.size();
  const size_t half = n / 2;

  auto take = [](const std::vector<SegSample>& src, size_t from, size_t to) {
    return std::vector<SegSample>(src.begin() + static_cast<long>(from),
                                  src.begin() + static_cast<long>(to));
  };
  auto append = [](std::vector<SegSample>& dst, std::vector<SegSample> tail) {
    dst.insert(dst.end(), std::make_move_iterator(tail.begin()),
               std::make_move_iterator(tail.end()));
  };

  std::vector<SegSample> corpus;
  switch (id) {
    case SetupId::A:
      corpus = real;
      break;
    case SetupId::B:
      corpus = synth;
      break;
    case SetupId::C:
      corpus = real;
      append(corpus, synth);
      break;
    case SetupId::D:
      corpus = take(real, 0, half);
      append(corpus, take(synth, 0, half));
      break;
    case SetupId::E:
      corpus = take(real, 0, half);
      append(corpus, take(synth, half, n));
      break;
    case SetupId::F:
      corpus = take(synth, 0, half);
      append(corpus, take(real, half, n));
      break;
  }
  return corpus;
}

SegUNet::Block::Block(int in_ch, int out_ch)
    : c1(in_ch, out_ch, 3), c2(out_ch, out_ch, 3) {}

void SegUNet::Block::init(RandomStream& rng) {
  c1.init(rng);
  c2.init(rng);
}

Tensor SegUNet::Block::forward(const Tensor& x) {
  return a2.forward(c2.forward(a1.forward(c1.forward(x))));
}

Tensor SegUNet::Block::backward(const Tensor& dy) {
  return c1.backward(a1.backward(c2.backward(a2.backward(dy))));
}

void SegUNet::Block::collect(const std::string& prefix,
                             std::vector<nn::ParamView>& out) {
  c1.collect(prefix + ".c1", out);
  c2.collect(prefix + ".c2", out);
}

SegUNet::SegUNet(Config cfg, uint64_t seed)
    : cfg_(cfg), e0_(cfg.in_ch, cfg.width), e1_(2 * cfg.width, 2 * cfg.width),
      e2_(4 * cfg.width, 4 * cfg.width), dec1_(2 * cfg.width, 2 * cfg.width),
      dec0_(cfg.width, cfg.width), down0_(cfg.width, 2 * cfg.width, 3, 2),
      down1_(2 * cfg.width, 4 * cfg.width, 3, 2),
      up1_(4 * cfg.width, 2 * cfg.width, 3), up0_(2 * cfg.width, cfg.width, 3),
      head_(cfg.width, 1, 1) {
  RandomStream rng(derive_seed(seed, "seg-init"));
  e0_.init(rng);
  down0_.init(rng);
  e1_.init(rng);
  down1_.init(rng);
  e2_.init(rng);
  up1_.init(rng);
  dec1_.init(rng);
  up0_.init(rng);
  dec0_.init(rng);
  head_.init(rng);

  nn::ParamGroup g{"segnet", false, {}};
  e0_.collect("segnet.e0", g.params);
  down0_.collect("segnet.down0", g.params);
  e1_.collect("segnet.e1", g.params);
  down1_.collect("segnet.down1", g.params);
  e2_.collect("segnet.e2", g.params);
  up1_.collect("segnet.up1", g.params);
  dec1_.collect("segnet.dec1", g.params);
  up0_.collect("segnet.up0", g.params);
  dec0_.collect("segnet.dec0", g.params);
  head_.collect("segnet.head", g.params);
  groups_.push_back(std::move(g));
}

Tensor SegUNet::logits(const Tensor& image01) {
  if (image01.rank() != 3 || image01.dim(0) != cfg_.in_ch)
    fail("ShapeError", "segmenter input must be (C,H,W) with declared C");
  if (image01.dim(1) % 4 != 0 || image01.dim(2) % 4 != 0)
    fail("ShapeError", "segmenter input dims must be divisible by 4");
  Tensor s0 = e0_.forward(image01);
  Tensor s1 = e1_.forward(dact0_.forward(down0_.forward(s0)));
  Tensor h = e2_.forward(dact1_.forward(down1_.forward(s1)));
  h = uact1_.forward(up1_.forward(nn::upsample2x(h)));
  add_inplace(h, s1);
  h = dec1_.forward(h);
  h = uact0_.forward(up0_.forward(nn::upsample2x(h)));
  add_inplace(h, s0);
  h = dec0_.forward(h);
  return head_.forward(h);
}

void SegUNet::backward(const Tensor& d_logits) {
  Tensor g = dec0_.backward(head_.backward(d_logits));
  Tensor ds0 = g;
  g = nn::upsample2x_backward(up0_.backward(uact0_.backward(g)));
  g = dec1_.backward(g);
  Tensor ds1 = g;
  g = nn::upsample2x_backward(up1_.backward(uact1_.backward(g)));
  g = e2_.backward(g);
  g = down1_.backward(dact1_.backward(g));
  add_inplace(g, ds1);
  g = e1_.backward(g);
  g = down0_.backward(dact0_.backward(g));
  add_inplace(g, ds0);
  e0_.backward(g);
}

ImageU8 SegUNet::predict_mask(const ImageU8& image) {
  Tensor z = logits(image_to_tensor_unit(image));
  ImageU8 mask(image.h, image.w, 1);
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x)
      mask.at(y, x) = z.at(0, y, x) > 0.0f ? 1 : 0;  // sigma(z) > 0.5
  return mask;
}

double evaluate_miou(SegUNet& model, const std::vector<SegSample>& val) {
  if (val.empty()) fail("InvalidArgument", "validation set is empty");
  double acc = 0.0;
  for (const auto& s : val)
    acc += metrics::iou(s.binary_mask, model.predict_mask(s.image));
  return acc / static_cast<double>(val.size());
}

namespace {

// Numerically stable binary cross-entropy on logits; writes the gradient
// for a batch-mean reduction and returns the per-pixel mean loss.
double bce_with_logits(const Tensor& z, const ImageU8& target, float scale,
                       Tensor& dz) {
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(z.size());
  for (int y = 0; y < target.h; ++y)
    for (int x = 0; x < target.w; ++x) {
      float zv = z.at(0, y, x);
      float t = static_cast<float>(target.at(y, x));
      loss += (std::max(zv, 0.0f) - zv * t +
               std::log1p(std::exp(-std::abs(zv)))) *
              inv;
      float sig = 1.0f / (1.0f + std::exp(-zv));
      dz.at(0, y, x) = scale * static_cast<float>(inv) * (sig - t);
    }
  return loss;
}

} // namespace

std::pair<std::unique_ptr<SegUNet>, SegTrainResult> train_segmenter(
    const std::vector<SegSample>& corpus, const std::vector<SegSample>& val,
    const SegTrainConfig& cfg, uint64_t seed) {
  if (corpus.empty()) fail("InvalidArgument", "training corpus is empty");
  if (val.empty()) fail("InvalidArgument", "validation set is empty");
  std::set<int> val_ids;
  for (const auto& s : val) val_ids.insert(s.mask_id);
  for (const auto& s : corpus)
    if (val_ids.count(s.mask_id))
      fail("LeakageError", "validation mask_id " + std::to_string(s.mask_id) +
                               " appears in the training corpus");

  auto model = std::make_unique<SegUNet>(
      SegUNet::Config{corpus[0].image.c, cfg.width}, seed);
  nn::Adam opt(cfg.lr);
  SegTrainResult res;

  std::vector<size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RandomStream shuf(derive_seed(seed, "seg-shuffle", epoch));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuf.uniform_int(static_cast<int64_t>(i))]);

    double epoch_loss = 0.0;
    size_t nb = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch) {
      const size_t end = std::min(order.size(), start + cfg.batch);
      nn::Adam::zero_grad(model->groups());
      double batch_loss = 0.0;
      const float scale = 1.0f / static_cast<float>(end - start);
      for (size_t i = start; i < end; ++i) {
        const auto& s = corpus[order[i]];
        Tensor z = model->logits(image_to_tensor_unit(s.image));
        Tensor dz(z.shape());
        batch_loss += bce_with_logits(z, s.binary_mask, scale, dz);
        model->backward(dz);
      }
      opt.step(model->groups());
      epoch_loss += batch_loss / static_cast<double>(end - start);
      ++nb;
    }
    res.epoch_losses.push_back(epoch_loss / static_cast<double>(nb));

    double miou = evaluate_miou(*model, val);
    res.epoch_mious.push_back(miou);
    if (res.best_epoch < 0 || miou > res.best_miou) {
      res.best_miou = miou;
      res.best_epoch = epoch;
    }
    res.final_miou = miou;
  }
  return {std::move(model), std::move(res)};
}

std::vector<SetupRow> run_setup_grid(const std::vector<SetupId>& setups,
                                     const std::vector<uint64_t>& seeds,
                                     const std::vector<SegSample>& real,
                                     const std::vector<SegSample>& synth,
                                     const std::vector<SegSample>& val,
                                     const SegTrainConfig& cfg) {
  if (seeds.empty()) fail("InvalidArgument", "need at least one seed");
  std::vector<SetupRow> rows;
  for (SetupId id : setups) {
    auto corpus = build_setup(id, real, synth);
    SetupRow row;
    row.id = id;
    for (const auto& s : corpus)
      (s.origin == Origin::Real ? row.n_real : row.n_synth) += 1;
    for (uint64_t seed : seeds) {
      auto [model, res] = train_segmenter(corpus, val, cfg, seed);
      row.per_seed.push_back(res.best_miou * 100.0);
    }
    const double n = static_cast<double>(row.per_seed.size());
    row.mean = std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) / n;
    double var = 0.0;
    for (double v : row.per_seed) var += (v - row.mean) * (v - row.mean);
    row.stddev = std::sqrt(var / n);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {
std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}
} // namespace

std::string setup_table_markdown(const std::vector<SetupRow>& rows) {
  std::ostringstream os;
  os << "| Setup | # Real | # Synthetic | mIoU | Std |\n";
  os << "|-------|--------|-------------|------|-----|\n";
  for (const auto& r : rows)
    os << "| " << setup_name(r.id) << " | " << r.n_real << " | " << r.n_synth
       << " | " << fmt3(r.mean) << " | " << fmt3(r.stddev) << " |\n";
  return os.str();
}

std::string setup_table_csv(const std::vector<SetupRow>& rows) {
  std::ostringstream os;
  os << "setup,n_real,n_synthetic,miou,std\n";
  for (const auto& r : rows)
    os << setup_name(r.id) << "," << r.n_real << "," << r.n_synth << ","
       << fmt3(r.mean) << "," << fmt3(r.stddev) << "\n";
  return os.str();
}

} // namespace railgen::seg
