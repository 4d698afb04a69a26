#include "railgen/metrics/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "railgen/core/error.hpp"
#include "railgen/core/tensor.hpp"
#include "railgen/nn/layers.hpp"

namespace railgen::metrics {

FeatureStats gaussian_stats(const std::vector<Eigen::VectorXd>& features) {
  const int n = static_cast<int>(features.size());
  if (n < 2)
    fail("InsufficientSamples", "need at least 2 feature vectors, got " +
                                    std::to_string(n));
  const long d = features[0].size();
  for (const auto& f : features)
    if (f.size() != d)
      fail("DimensionMismatch", "inconsistent feature dimensions");

  FeatureStats s;
  s.n = n;
  s.mu = Eigen::VectorXd::Zero(d);
  for (const auto& f : features) s.mu += f;
  s.mu /= n;

  Eigen::MatrixXd centered(n, d);
  for (int i = 0; i < n; ++i)
    centered.row(i) = (features[static_cast<size_t>(i)] - s.mu).transpose();
  s.sigma = centered.transpose() * centered / static_cast<double>(n - 1);
  s.sigma = ((s.sigma + s.sigma.transpose()) / 2.0).eval();
  return s;
}

namespace {

// Rank tolerance: eigenvalues below this are indistinguishable from zero
// for a D-dim symmetric matrix, and taking their square roots would
// amplify noise (sqrt(1e-15) ~ 3e-8 per null mode).
double noise_floor(const Eigen::VectorXd& ev) {
  double top = 0.0;
  for (long i = 0; i < ev.size(); ++i) top = std::max(top, std::abs(ev[i]));
  return top * static_cast<double>(ev.size()) *
         std::numeric_limits<double>::epsilon();
}

// PSD square root via symmetric eigendecomposition; negative eigenvalues
// beyond tolerance abort, small ones clamp to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    fail("NumericalFailure", std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double floor = noise_floor(ev);
  for (long i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-8)
      fail("NumericalFailure", std::string(what) +
                                   ": eigenvalue below tolerance: " +
                                   std::to_string(ev[i]));
    ev[i] = ev[i] > floor ? std::sqrt(ev[i]) : 0.0;
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.mu.size() != b.mu.size() || a.sigma.rows() != b.sigma.rows())
    fail("DimensionMismatch", "feature statistics have different dimensions");

  const Eigen::VectorXd dmu = a.mu - b.mu;
  const double mean_term = dmu.squaredNorm();

  const Eigen::MatrixXd sa = (a.sigma + a.sigma.transpose()) / 2.0;
  const Eigen::MatrixXd sb = (b.sigma + b.sigma.transpose()) / 2.0;

  const Eigen::MatrixXd ra = psd_sqrt(sa, "sigma_a");
  Eigen::MatrixXd inner = ra * sb * ra;
  inner = ((inner + inner.transpose()) / 2.0).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  if (es.info() != Eigen::Success)
    fail("NumericalFailure", "product eigendecomposition failed");
  const double floor = noise_floor(es.eigenvalues());
  double tr_sqrt = 0.0;
  for (long i = 0; i < es.eigenvalues().size(); ++i) {
    double ev = es.eigenvalues()[i];
    if (ev < -1e-8)
      fail("NumericalFailure",
           "product eigenvalue below tolerance: " + std::to_string(ev));
    if (ev > floor) tr_sqrt += std::sqrt(ev);
  }

  double result = mean_term + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
  if (result < 0) {
    if (result < -1e-8)
      fail("NumericalFailure",
           "distance evaluated negative: " + std::to_string(result));
    result = 0.0;
  }
  return result;
}

double fid(const std::vector<ImageU8>& real, const std::vector<ImageU8>& synth,
           FeatureExtractor& extractor) {
  if (real.size() < 2 || synth.size() < 2)
    fail("InsufficientSamples", "fid needs at least 2 images per set");
  std::vector<Eigen::VectorXd> fr, fs;
  fr.reserve(real.size());
  fs.reserve(synth.size());
  for (const auto& im : real) fr.push_back(extractor.embed(im));
  for (const auto& im : synth) fs.push_back(extractor.embed(im));
  return frechet_distance(gaussian_stats(fr), gaussian_stats(fs));
}

double iou(const ImageU8& y, const ImageU8& y_pred) {
  if (y.h != y_pred.h || y.w != y_pred.w || y.c != 1 || y_pred.c != 1)
    fail("SizeMismatch", "iou masks must be single-channel and same size");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < y.px.size(); ++i) {
    unsigned char a = y.px[i], b = y_pred.px[i];
    if (a > 1 || b > 1)
      fail("InvalidMask", "iou masks must be binary {0,1}");
    inter += (a & b);
    uni += (a | b);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

Tensor image_to_unit3(const ImageU8& img) {
  Tensor t({3, img.h, img.w});
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(c, y, x) =
            img.at(y, x, img.c == 3 ? c : 0) / 255.0f;
  return t;
}

class DeskExtractor : public FeatureExtractor {
public:
  explicit DeskExtractor(uint64_t seed)
      : seed_(seed), conv1_(3, 16, 3, 2), conv2_(16, 16, 3, 2) {
    RandomStream rng(derive_seed(seed, "extractor-init"));
    conv1_.init(rng);
    conv2_.init(rng);
  }

  Eigen::VectorXd embed(const ImageU8& image) override {
    if (image.h < 8 || image.w < 8)
      fail("ShapeError", "extractor input must be at least 8x8");
    Tensor h = a1_.forward(conv1_.forward(image_to_unit3(image)));
    h = a2_.forward(conv2_.forward(h));
    // adaptive 4x4 average pool per channel -> 16*16 = 256 features
    Eigen::VectorXd out(256);
    const int ch = h.dim(0), hh = h.dim(1), ww = h.dim(2);
    int k = 0;
    for (int c = 0; c < ch; ++c) {
      for (int by = 0; by < 4; ++by) {
        int y0 = by * hh / 4, y1 = (by + 1) * hh / 4;
        for (int bx = 0; bx < 4; ++bx) {
          int x0 = bx * ww / 4, x1 = (bx + 1) * ww / 4;
          double acc = 0.0;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) acc += h.at(c, y, x);
          out[k++] = acc / ((y1 - y0) * (x1 - x0));
        }
      }
    }
    return out;
  }

  int dim() const override { return 256; }
  bool deterministic() const override { return true; }
  std::string id() const override {
    return "desk-rconv256-seed" + std::to_string(seed_);
  }

private:
  uint64_t seed_;
  nn::Conv2d conv1_, conv2_;
  nn::SiLU a1_, a2_;
};

class IdentityExtractor : public FeatureExtractor {
public:
  IdentityExtractor(int h, int w, int c) : h_(h), w_(w), c_(c) {}

  Eigen::VectorXd embed(const ImageU8& image) override {
    if (image.h != h_ || image.w != w_ || image.c != c_)
      fail("DimensionMismatch", "identity extractor requires fixed dims");
    Eigen::VectorXd out(dim());
    for (size_t i = 0; i < image.px.size(); ++i)
      out[static_cast<long>(i)] = image.px[i] / 255.0;
    return out;
  }

  int dim() const override { return h_ * w_ * c_; }
  bool deterministic() const override { return true; }
  std::string id() const override { return "identity-pixels"; }

private:
  int h_, w_, c_;
};

} // namespace

std::unique_ptr<FeatureExtractor> make_desk_extractor(uint64_t seed) {
  return std::make_unique<DeskExtractor>(seed);
}

std::unique_ptr<FeatureExtractor> make_identity_extractor(int h, int w, int c) {
  return std::make_unique<IdentityExtractor>(h, w, c);
}

} // namespace railgen::metrics
