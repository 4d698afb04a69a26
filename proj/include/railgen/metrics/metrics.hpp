#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "railgen/core/image.hpp"
#include "railgen/core/rng.hpp"

namespace railgen::metrics {

// Gaussian fit of an embedded image set.
struct FeatureStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;  // sample covariance, n-1 divisor, symmetric
  int n = 0;
};

class FeatureExtractor {
public:
  virtual ~FeatureExtractor() = default;
  virtual Eigen::VectorXd embed(const ImageU8& image) = 0;
  virtual int dim() const = 0;
  virtual bool deterministic() const = 0;
  virtual std::string id() const = 0;
};

FeatureStats gaussian_stats(const std::vector<Eigen::VectorXd>& features);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}). The matrix square
// root runs through symmetric eigendecompositions: sqrt(Sa) first, then
// the symmetrized conjugation sqrt(Sa) Sb sqrt(Sa), whose spectrum equals
// that of Sa Sb. Eigenvalues below -1e-8 abort; tiny negatives clamp to 0.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

double fid(const std::vector<ImageU8>& real, const std::vector<ImageU8>& synth,
           FeatureExtractor& extractor);

// Intersection over union of two binary {0,1} single-channel masks.
// Both masks empty is defined as 1.0.
double iou(const ImageU8& y, const ImageU8& y_pred);

// Frozen random-convolution embedder, D=256, identical across processes
// for the same seed. Stand-in for a pretrained feature network.
std::unique_ptr<FeatureExtractor> make_desk_extractor(uint64_t seed);

// Raw-pixel features of fixed-size images, D = c*h*w; exact analytic FID
// cases build on this.
std::unique_ptr<FeatureExtractor> make_identity_extractor(int h, int w, int c);

} // namespace railgen::metrics
