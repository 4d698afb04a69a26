#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "railgen/core/image.hpp"
#include "railgen/core/rng.hpp"
#include "railgen/core/tensor.hpp"
#include "railgen/data/dataset.hpp"
#include "railgen/nn/layers.hpp"
#include "railgen/nn/params.hpp"

namespace railgen::seg {

enum class Origin { Real, Synthetic };

struct SegSample {
  ImageU8 image;        // H x W x 3
  ImageU8 binary_mask;  // H x W x 1, values {0,1}
  Origin origin = Origin::Real;
  int mask_id = -1;  // shared identity between a real image and the
                     // synthetic one generated from its mask
};

// Pixel = 1 iff its class id is in rail_ids.
ImageU8 binarize_mask(const ImageU8& class_mask, const std::set<int>& rail_ids,
                      const data::ClassTable& table);

enum class SetupId { A, B, C, D, E, F };

SetupId parse_setup(const std::string& name);
std::string setup_name(SetupId id);

// Training-corpus composition per setup, with n = |real| = |synth|:
//   A: real             B: synth            C: real + synth (2n items)
//   D: first halves of both (n items, n/2 unique masks)
//   E: first half real + second half synth (n items, n unique masks)
//   F: first half synth + second half real (n items, n unique masks)
// real and synth must be aligned by mask_id at every index.
std::vector<SegSample> build_setup(SetupId id,
                                   const std::vector<SegSample>& real,
                                   const std::vector<SegSample>& synth);

// Encoder-decoder over 3 resolution levels with additive skips; emits
// single-channel logits.
class SegUNet {
public:
  struct Config {
    int in_ch = 3;
    int width = 8;
  };

  SegUNet(Config cfg, uint64_t seed);
  SegUNet(const SegUNet&) = delete;
  SegUNet& operator=(const SegUNet&) = delete;

  Tensor logits(const Tensor& image01);
  void backward(const Tensor& d_logits);
  std::vector<nn::ParamGroup>& groups() { return groups_; }

  ImageU8 predict_mask(const ImageU8& image);  // sigmoid(z) > 0.5

private:
  struct Block {
    nn::Conv2d c1, c2;
    nn::SiLU a1, a2;
    Block() = default;
    Block(int in_ch, int out_ch);
    void init(RandomStream& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void collect(const std::string& prefix, std::vector<nn::ParamView>& out);
  };

  Config cfg_;
  Block e0_, e1_, e2_, dec1_, dec0_;
  nn::Conv2d down0_, down1_, up1_, up0_, head_;
  nn::SiLU dact0_, dact1_, uact1_, uact0_;
  std::vector<nn::ParamGroup> groups_;
};

struct SegTrainConfig {
  int epochs = 20;
  int batch = 4;
  float lr = 1e-3f;
  int width = 8;
};

struct SegTrainResult {
  double best_miou = 0.0;
  int best_epoch = -1;
  double final_miou = 0.0;
  std::vector<double> epoch_losses;
  std::vector<double> epoch_mious;
};

double evaluate_miou(SegUNet& model, const std::vector<SegSample>& val);

// Binary cross-entropy training with per-epoch validation. Returns the
// trained model and the best-epoch validation mIoU (final epoch logged
// alongside). Validation must be disjoint from the corpus by mask_id.
std::pair<std::unique_ptr<SegUNet>, SegTrainResult> train_segmenter(
    const std::vector<SegSample>& corpus, const std::vector<SegSample>& val,
    const SegTrainConfig& cfg, uint64_t seed);

struct SetupRow {
  SetupId id;
  int n_real = 0;
  int n_synth = 0;
  double mean = 0.0;    // scaled to 0..100
  double stddev = 0.0;  // population std, same scale
  std::vector<double> per_seed;
};

std::vector<SetupRow> run_setup_grid(const std::vector<SetupId>& setups,
                                     const std::vector<uint64_t>& seeds,
                                     const std::vector<SegSample>& real,
                                     const std::vector<SegSample>& synth,
                                     const std::vector<SegSample>& val,
                                     const SegTrainConfig& cfg);

std::string setup_table_markdown(const std::vector<SetupRow>& rows);
std::string setup_table_csv(const std::vector<SetupRow>& rows);

} // namespace railgen::seg
