#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "railgen/cond/condition.hpp"
#include "railgen/control/control.hpp"
#include "railgen/core/config.hpp"
#include "railgen/core/manifest.hpp"
#include "railgen/data/dataset.hpp"
#include "railgen/exp/config.hpp"
#include "railgen/metrics/metrics.hpp"
#include "railgen/prompt/prompt.hpp"
#include "railgen/seg/seg.hpp"

namespace railgen::exp {

// One cell row of the generation grid: prompt regime x negative toggle.
struct GridCell {
  prompt::Regime regime;
  bool neg = false;
};

// Row and column orders of the generation report.
const std::vector<GridCell>& grid_rows();
const std::vector<cond::Scheme>& grid_schemes();

std::string cell_id(const GridCell& cell);     // filesystem-safe
std::string cell_label(const GridCell& cell);  // for report rows

// Orchestrates the run directory: staged artifacts, completion markers,
// manifest records, and report emission. Every stage is deterministic in
// (config hash, run.seed) and skips itself when already complete.
class Pipeline {
public:
  explicit Pipeline(KvConfig cfg);

  const KvConfig& config() const { return cfg_; }
  const std::string& config_hash() const { return hash_; }
  Manifest& manifest() { return manifest_; }
  const std::filesystem::path& root() const { return root_; }

  void make_toy_data(bool force = false);
  void prepare_data(bool force = false);
  void build_conditions(cond::Scheme scheme, bool force = false);
  void train_control(cond::Scheme scheme, bool force = false);
  void generate_cell(cond::Scheme scheme, const GridCell& cell,
                     bool force = false);
  double eval_fid_cell(cond::Scheme scheme, const GridCell& cell,
                       bool force = false);
  void run_generation_grid(bool force = false);
  void run_seg_grid(bool force = false);

  std::string generation_report_markdown() const;
  std::string generation_report_csv() const;
  std::string fid_report_csv() const;
  std::string seg_report_markdown() const;
  std::string report_all() const;

  data::ClassTable class_table() const;
  std::vector<data::ScenePair> load_split(const std::string& which) const;

  std::filesystem::path data_dir() const { return root_ / "data"; }
  std::filesystem::path raw_dir() const;
  std::filesystem::path checkpoints_dir() const { return root_ / "checkpoints"; }
  std::filesystem::path samples_dir() const { return root_ / "samples"; }
  std::filesystem::path reports_dir() const { return root_ / "reports"; }

private:
  void ensure_data();
  diffusion::NoiseSchedule schedule() const;
  diffusion::UNetDenoiser::Config model_config() const;
  cond::CannyParams canny_params() const;
  std::vector<int> latent_shape(const std::vector<data::ScenePair>& pairs) const;
  uint64_t run_seed() const;
  int rail_id() const;

  std::shared_ptr<diffusion::UNetDenoiser> load_or_train_base(bool force);
  std::unique_ptr<control::ControlledDenoiser> attach_for_run(
      std::shared_ptr<diffusion::UNetDenoiser> base,
      const std::vector<int>& latent, cond::Scheme scheme) const;
  std::unique_ptr<control::ControlledDenoiser> load_control(
      cond::Scheme scheme, std::shared_ptr<diffusion::UNetDenoiser> base,
      const std::vector<int>& latent);

  prompt::PromptBundle bundle_for(const data::ScenePair& pair,
                                  prompt::Regime regime, bool neg) const;
  Tensor condition_tensor(const data::ScenePair& pair,
                          cond::Scheme scheme) const;
  std::unique_ptr<metrics::FeatureExtractor> make_extractor(
      const std::vector<ImageU8>& sample_of_inputs) const;

  // latest cached fid per (scheme, cell), keyed "scheme/cell_id"
  std::map<std::string, nlohmann::json> cached_fid_cells() const;

  KvConfig cfg_;
  std::string hash_;
  std::filesystem::path root_;
  Manifest manifest_;
};

} // namespace railgen::exp
