#include "railgen/exp/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "railgen/core/error.hpp"
#include "railgen/core/rng.hpp"
#include "railgen/data/toy.hpp"
#include "railgen/diffusion/codec.hpp"
#include "railgen/diffusion/train.hpp"
#include "railgen/io/image_io.hpp"
#include "railgen/nn/checkpoint.hpp"
#include "railgen/prompt/captioner_http.hpp"

namespace fs = std::filesystem;

namespace railgen::exp {

namespace {

std::string stem5(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", i);
  return buf;
}

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void write_pairs(const fs::path& dir, const std::vector<data::ScenePair>& pairs) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  for (size_t i = 0; i < pairs.size(); ++i) {
    std::string stem = stem5(static_cast<int>(i));
    io::write_png(dir / "images" / (stem + ".png"), pairs[i].image);
    io::write_png(dir / "masks" / (stem + ".png"), pairs[i].mask);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    fail("IoError", "cannot write " + path.string());
  out << text;
}

} // namespace

const std::vector<GridCell>& grid_rows() {
  static const std::vector<GridCell> rows = {
      {prompt::Regime::None, false},      {prompt::Regime::Fixed, false},
      {prompt::Regime::Captioned, false}, {prompt::Regime::None, true},
      {prompt::Regime::Fixed, true},      {prompt::Regime::Captioned, true},
  };
  return rows;
}

const std::vector<cond::Scheme>& grid_schemes() {
  static const std::vector<cond::Scheme> cols = {
      cond::Scheme::MaskOnly, cond::Scheme::CannyOnly, cond::Scheme::Cmb12,
      cond::Scheme::Cmb21, cond::Scheme::Cmb111};
  return cols;
}

std::string cell_id(const GridCell& cell) {
  std::string s = prompt::regime_name(cell.regime);
  if (cell.neg)
    s += "_neg";
  return s;
}

std::string cell_label(const GridCell& cell) {
  std::string s = prompt::regime_name(cell.regime);
  if (cell.neg)
    s += "+neg";
  return s;
}

Pipeline::Pipeline(KvConfig cfg)
    : cfg_(std::move(cfg)), hash_(cfg_.hash()),
      root_(cfg_.get_or("out.dir", "runs/dev")), manifest_(root_) {
  auto issues = validate_config(cfg_);
  if (!issues.empty())
    fail("ConfigConflict", issues.front());
  cfg_.save(root_ / "config.txt");
  manifest_.event("config", {{"hash", hash_}});
}

fs::path Pipeline::raw_dir() const {
  std::string root = cfg_.get_or("data.root", "");
  if (root.empty())
    return root_ / "raw";
  return fs::path(root);
}

uint64_t Pipeline::run_seed() const {
  return static_cast<uint64_t>(cfg_.get_int("run.seed"));
}

int Pipeline::rail_id() const {
  auto ids = parse_id_set(cfg_.get("data.rail_ids"));
  return *ids.begin();
}

data::ClassTable Pipeline::class_table() const {
  fs::path p = data_dir() / "classes.txt";
  if (!fs::exists(p))
    fail("MissingArtifact", "class table not found at " + p.string() +
                                "; run prepare-data first");
  return data::ClassTable::from_file(p);
}

std::vector<data::ScenePair> Pipeline::load_split(const std::string& which) const {
  fs::path dir = data_dir() / which;
  if (!fs::exists(dir / "images"))
    fail("MissingArtifact", "split '" + which + "' not found under " +
                                data_dir().string() + "; run prepare-data first");
  return data::load_scene_pairs(dir, class_table());
}

void Pipeline::make_toy_data(bool force) {
  fs::path raw = raw_dir();
  if (!force && manifest_.is_complete("toy-data", hash_) &&
      fs::exists(raw / "images"))
    return;
  data::ToyOptions opts;
  opts.height = static_cast<int>(cfg_.get_int("data.toy_height"));
  opts.width = static_cast<int>(cfg_.get_int("data.toy_width"));
  int n = static_cast<int>(cfg_.get_int("data.toy_count"));
  auto pairs = data::generate_toy_dataset(n, derive_seed(run_seed(), "toy-data"),
                                          opts);
  write_pairs(raw, pairs);
  data::toy_class_table().save(raw / "classes.txt");
  manifest_.event("toy-data", {{"count", n},
                               {"height", opts.height},
                               {"width", opts.width},
                               {"dir", raw.string()}});
  manifest_.mark_complete("toy-data", hash_);
}

void Pipeline::prepare_data(bool force) {
  if (!force && manifest_.is_complete("prepare-data", hash_) &&
      fs::exists(data_dir() / "train" / "images") &&
      fs::exists(data_dir() / "val" / "images"))
    return;
  fs::path raw = raw_dir();
  if (!fs::exists(raw / "images")) {
    if (cfg_.get_or("data.source", "toy") == "toy")
      make_toy_data(force);
    else
      fail("MissingArtifact",
           "no images under " + raw.string() + " (data.root)");
  }
  if (!fs::exists(raw / "classes.txt"))
    fail("MissingArtifact", "missing class table " +
                                (raw / "classes.txt").string());
  auto table = data::ClassTable::from_file(raw / "classes.txt");
  auto pairs = data::load_scene_pairs(raw, table);
  if (pairs.empty())
    fail("EmptyDataset", "no image/mask pairs under " + raw.string());

  int ch = static_cast<int>(cfg_.get_int_or("data.crop_height", 0));
  int cw = static_cast<int>(cfg_.get_int_or("data.crop_width", 0));
  int rs = static_cast<int>(cfg_.get_int_or("data.resize", 0));
  for (auto& p : pairs) {
    if (ch > 0 && cw > 0)
      p = data::center_crop(p, ch, cw);
    if (rs > 0)
      p = data::resize_pair(p, rs, rs);
  }

  auto split = data::split_dataset(pairs, cfg_.get_double("data.split_ratio"),
                                   static_cast<uint64_t>(
                                       cfg_.get_int("data.split_seed")));
  write_pairs(data_dir() / "train", split.train);
  write_pairs(data_dir() / "val", split.val);
  table.save(data_dir() / "classes.txt");

  nlohmann::json trace;
  trace["ratio"] = split.ratio;
  trace["seed"] = split.seed;
  auto ids = [](const std::vector<data::ScenePair>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : v)
      a.push_back(p.source_id);
    return a;
  };
  trace["train"] = ids(split.train);
  trace["val"] = ids(split.val);
  write_text(data_dir() / "split.json", trace.dump(2) + "\n");

  manifest_.event("prepare-data", {{"train", split.train.size()},
                                   {"val", split.val.size()},
                                   {"crop_h", ch},
                                   {"crop_w", cw},
                                   {"resize", rs}});
  manifest_.mark_complete("prepare-data", hash_);
}

void Pipeline::ensure_data() {
  if (!fs::exists(data_dir() / "train" / "images") ||
      !fs::exists(data_dir() / "val" / "images"))
    prepare_data(false);
}

cond::CannyParams Pipeline::canny_params() const {
  cond::CannyParams p;
  p.sigma = cfg_.get_double_or("cond.canny_sigma", p.sigma);
  p.low = cfg_.get_double_or("cond.canny_low", p.low);
  p.high = cfg_.get_double_or("cond.canny_high", p.high);
  return p;
}

Tensor Pipeline::condition_tensor(const data::ScenePair& pair,
                                  cond::Scheme scheme) const {
  auto ci = cond::build_condition(pair.mask, pair.image, scheme,
                                  canny_params(), pair.index);
  return cond::normalize_condition(ci);
}

void Pipeline::build_conditions(cond::Scheme scheme, bool force) {
  std::string key = "conditions:" + cond::scheme_name(scheme);
  fs::path base = root_ / "conditions" / cond::scheme_name(scheme);
  if (!force && manifest_.is_complete(key, hash_) && fs::exists(base))
    return;
  ensure_data();
  int count = 0;
  for (const std::string which : {"train", "val"}) {
    auto pairs = load_split(which);
    fs::path dir = base / which;
    fs::create_directories(dir);
    for (const auto& p : pairs) {
      auto ci = cond::build_condition(p.mask, p.image, scheme, canny_params(),
                                      p.index);
      io::write_png(dir / (stem5(p.index) + ".png"), ci.channels);
      ++count;
    }
  }
  manifest_.event("conditions", {{"scheme", cond::scheme_name(scheme)},
                                 {"count", count}});
  manifest_.mark_complete(key, hash_);
}

diffusion::NoiseSchedule Pipeline::schedule() const {
  return diffusion::make_schedule(cfg_.get_or("schedule.kind", "linear"),
                                  static_cast<int>(cfg_.get_int("schedule.T")),
                                  cfg_.get_double("schedule.beta_start"),
                                  cfg_.get_double("schedule.beta_end"));
}

diffusion::UNetDenoiser::Config Pipeline::model_config() const {
  diffusion::UNetDenoiser::Config mc;
  mc.in_ch = 3;
  mc.width = static_cast<int>(cfg_.get_int("model.width"));
  mc.emb_dim = static_cast<int>(cfg_.get_int("model.emb_dim"));
  mc.prompt_buckets = static_cast<int>(cfg_.get_int("model.prompt_buckets"));
  return mc;
}

std::vector<int> Pipeline::latent_shape(
    const std::vector<data::ScenePair>& pairs) const {
  if (pairs.empty())
    fail("EmptyDataset", "no pairs to derive the working shape from");
  return {3, pairs[0].image.h, pairs[0].image.w};
}

prompt::PromptBundle Pipeline::bundle_for(const data::ScenePair& pair,
                                          prompt::Regime regime,
                                          bool neg) const {
  prompt::PromptOptions opts;
  opts.fixed_text = cfg_.get_or("prompt.fixed_text", opts.fixed_text);
  std::string deco = cfg_.get_or("prompt.decorator", "default");
  if (deco == "default")
    opts.decorator = prompt::kDecoratorDefault;
  else if (deco == "short")
    opts.decorator = prompt::kDecoratorShort;
  else
    opts.decorator.clear();

  std::unique_ptr<prompt::Captioner> cap;
  if (regime == prompt::Regime::Captioned) {
    std::string kind = cfg_.get_or("prompt.captioner", "stub");
    if (kind == "stub") {
      cap = std::make_unique<prompt::StubCaptioner>(class_table(), rail_id());
    } else {
      std::string url = cfg_.get_or("prompt.captioner_url", "");
      if (url.empty())
        fail("InvalidArgument",
             "prompt.captioner_url: required when prompt.captioner=http");
      cap = std::make_unique<prompt::HttpCaptioner>(url);
    }
  }
  return prompt::build_prompt_bundle(pair, regime, neg, cap.get(), opts);
}

std::shared_ptr<diffusion::UNetDenoiser> Pipeline::load_or_train_base(
    bool force) {
  fs::path ckpt = checkpoints_dir() / "base.ckpt";
  auto base = std::make_shared<diffusion::UNetDenoiser>(
      model_config(), derive_seed(run_seed(), "base-init"));
  if (!force && fs::exists(ckpt)) {
    auto groups = base->groups();
    nn::load_checkpoint(ckpt.string(), groups);
    return base;
  }
  int steps = static_cast<int>(cfg_.get_int("train.base_steps"));
  if (steps <= 0)
    fail("MissingArtifact",
         "base checkpoint " + ckpt.string() +
             " not found and train.base_steps is 0; supply a pretrained base");

  ensure_data();
  auto split = load_split("train");
  prompt::Regime regime =
      prompt::regime_from_name(cfg_.get_or("train.prompt_regime", "fixed"));
  std::vector<diffusion::TrainItem> items;
  items.reserve(split.size());
  std::vector<prompt::PromptBundle> bundles;
  bundles.reserve(split.size());
  for (const auto& p : split) {
    bundles.push_back(bundle_for(p, regime, false));
    items.push_back({image_to_tensor_signed(p.image), bundles.back().positive,
                     nullptr});
  }

  diffusion::IdentityCodec codec;
  diffusion::DiffusionTrainer trainer(*base, codec, schedule(),
                                      cfg_.get_double("train.lr"));
  RandomStream rng(derive_seed(run_seed(), "base-train"));
  int bs = static_cast<int>(cfg_.get_int("train.batch"));
  for (int s = 0; s < steps; ++s) {
    std::vector<diffusion::TrainItem> batch;
    for (int b = 0; b < bs; ++b)
      batch.push_back(items[rng.uniform_int(static_cast<int>(items.size()))]);
    trainer.step(batch, rng);
  }
  fs::create_directories(checkpoints_dir());
  fs::create_directories(root_ / "loss");
  auto groups = base->groups();
  nn::save_checkpoint(ckpt.string(), groups,
                      {{"stage", "base"}, {"config", hash_}, {"steps", steps}});
  diffusion::write_loss_csv((root_ / "loss" / "base.csv").string(),
                            trainer.losses());
  manifest_.event("train-base",
                  {{"steps", steps}, {"final_loss", trainer.losses().back()}});
  manifest_.mark_complete("train-base", hash_);
  return base;
}

std::unique_ptr<control::ControlledDenoiser> Pipeline::attach_for_run(
    std::shared_ptr<diffusion::UNetDenoiser> base,
    const std::vector<int>& latent, cond::Scheme scheme) const {
  control::ControlledDenoiser::Options opts;
  opts.cond_shape = {3, latent[1], latent[2]};
  opts.encoder_width = static_cast<int>(cfg_.get_int("control.encoder_width"));
  opts.clone_gets_prompt = cfg_.get_bool_or("control.clone_prompt", true);
  auto blocks = split_list(cfg_.get("control.blocks"));
  return control::attach_control(
      std::move(base), blocks, latent, opts,
      derive_seed(run_seed(), "control-init-" + cond::scheme_name(scheme)));
}

void Pipeline::train_control(cond::Scheme scheme, bool force) {
  std::string sname = cond::scheme_name(scheme);
  std::string key = "train-control:" + sname;
  fs::path ckpt = checkpoints_dir() / ("control-" + sname + ".ckpt");
  if (!force && manifest_.is_complete(key, hash_) && fs::exists(ckpt))
    return;
  ensure_data();
  auto base = load_or_train_base(false);
  auto split = load_split("train");
  auto latent = latent_shape(split);
  auto cd = attach_for_run(base, latent, scheme);

  prompt::Regime regime =
      prompt::regime_from_name(cfg_.get_or("train.prompt_regime", "fixed"));
  std::vector<Tensor> conds;
  conds.reserve(split.size());
  std::vector<prompt::PromptBundle> bundles;
  bundles.reserve(split.size());
  std::vector<diffusion::TrainItem> items;
  items.reserve(split.size());
  for (const auto& p : split) {
    conds.push_back(condition_tensor(p, scheme));
    bundles.push_back(bundle_for(p, regime, false));
    items.push_back({image_to_tensor_signed(p.image), bundles.back().positive,
                     &conds.back()});
  }

  diffusion::IdentityCodec codec;
  diffusion::DiffusionTrainer trainer(*cd, codec, schedule(),
                                      cfg_.get_double("train.lr"));
  RandomStream rng(derive_seed(run_seed(), "control-train-" + sname));
  int steps = static_cast<int>(cfg_.get_int("train.steps"));
  int bs = static_cast<int>(cfg_.get_int("train.batch"));
  for (int s = 0; s < steps; ++s) {
    std::vector<diffusion::TrainItem> batch;
    for (int b = 0; b < bs; ++b)
      batch.push_back(items[rng.uniform_int(static_cast<int>(items.size()))]);
    control::control_training_step(trainer, batch, rng);
  }
  fs::create_directories(checkpoints_dir());
  fs::create_directories(root_ / "loss");
  control::save_control_checkpoint(ckpt.string(), *cd,
                                   {{"stage", "control"},
                                    {"scheme", sname},
                                    {"config", hash_},
                                    {"steps", steps}});
  diffusion::write_loss_csv((root_ / "loss" / ("control-" + sname + ".csv")).string(),
                            trainer.losses());
  manifest_.event("train-control", {{"scheme", sname},
                                    {"steps", steps},
                                    {"final_loss", trainer.losses().back()}});
  manifest_.mark_complete(key, hash_);
}

std::unique_ptr<control::ControlledDenoiser> Pipeline::load_control(
    cond::Scheme scheme, std::shared_ptr<diffusion::UNetDenoiser> base,
    const std::vector<int>& latent) {
  std::string sname = cond::scheme_name(scheme);
  fs::path ckpt = checkpoints_dir() / ("control-" + sname + ".ckpt");
  if (!fs::exists(ckpt))
    fail("MissingArtifact", "control checkpoint " + ckpt.string() +
                                " not found; run train-control first");
  auto cd = attach_for_run(std::move(base), latent, scheme);
  control::load_control_checkpoint(ckpt.string(), *cd);
  return cd;
}

void Pipeline::generate_cell(cond::Scheme scheme, const GridCell& cell,
                             bool force) {
  std::string sname = cond::scheme_name(scheme);
  std::string cid = cell_id(cell);
  std::string key = "generate:" + sname + ":" + cid;
  fs::path dir = samples_dir() / sname / cid;
  if (!force && manifest_.is_complete(key, hash_) && fs::exists(dir))
    return;
  ensure_data();
  train_control(scheme, false);
  auto base = load_or_train_base(false);
  auto val = load_split("val");
  auto latent = latent_shape(val);
  auto cd = load_control(scheme, base, latent);

  int n = std::min<int>(static_cast<int>(cfg_.get_int("sample.count")),
                        static_cast<int>(val.size()));
  diffusion::IdentityCodec codec;
  auto sched = schedule();
  diffusion::SampleOptions opts;
  opts.stochastic = cfg_.get_bool_or("sample.stochastic", false);
  opts.guidance = cfg_.get_double_or("sample.guidance", 2.0);

  fs::create_directories(dir);
  for (int i = 0; i < n; ++i) {
    fs::path out = dir / (stem5(i) + ".png");
    if (!force && fs::exists(out))
      continue;
    auto pb = bundle_for(val[i], cell.regime, cell.neg);
    Tensor c = condition_tensor(val[i], scheme);
    uint64_t seed = derive_seed(run_seed(), "sample-" + sname + "-" + cid,
                                static_cast<uint64_t>(i));
    RandomStream rng(seed);
    Tensor img = diffusion::sample(*cd, codec, sched, latent, pb, &c, rng, opts);
    io::write_png(out, tensor_to_image_signed(img));
    manifest_.event("sample", {{"file", out.string()},
                               {"scheme", sname},
                               {"cell", cid},
                               {"index", i},
                               {"source_index", val[i].index},
                               {"source_id", val[i].source_id},
                               {"seed", std::to_string(seed)},
                               {"prompt", pb.positive},
                               {"negative", pb.negative},
                               {"config", hash_}});
  }
  manifest_.mark_complete(key, hash_);
}

std::unique_ptr<metrics::FeatureExtractor> Pipeline::make_extractor(
    const std::vector<ImageU8>& sample_of_inputs) const {
  std::string kind = cfg_.get_or("fid.extractor", "desk");
  if (kind == "identity") {
    const auto& im = sample_of_inputs.at(0);
    return metrics::make_identity_extractor(im.h, im.w, im.c);
  }
  return metrics::make_desk_extractor(
      static_cast<uint64_t>(cfg_.get_int("fid.extractor_seed")));
}

std::map<std::string, nlohmann::json> Pipeline::cached_fid_cells() const {
  std::map<std::string, nlohmann::json> out;
  for (const auto& ev : manifest_.events()) {
    if (ev.value("kind", "") != "fid-cell")
      continue;
    const auto& pl = ev.at("data");
    if (pl.value("config", "") != hash_)
      continue;
    out[pl.value("scheme", "") + "/" + pl.value("cell", "")] = pl;
  }
  return out;
}

double Pipeline::eval_fid_cell(cond::Scheme scheme, const GridCell& cell,
                               bool force) {
  std::string sname = cond::scheme_name(scheme);
  std::string cid = cell_id(cell);
  if (!force) {
    auto cached = cached_fid_cells();
    auto it = cached.find(sname + "/" + cid);
    if (it != cached.end())
      return it->second.value("fid", 0.0);
  }
  ensure_data();
  auto val = load_split("val");
  int n = std::min<int>(static_cast<int>(cfg_.get_int("sample.count")),
                        static_cast<int>(val.size()));
  std::vector<ImageU8> real;
  for (int i = 0; i < n; ++i)
    real.push_back(val[i].image);

  fs::path dir = samples_dir() / sname / cid;
  std::vector<ImageU8> synth;
  for (int i = 0; i < n; ++i) {
    fs::path p = dir / (stem5(i) + ".png");
    if (!fs::exists(p))
      fail("MissingArtifact", "sample " + p.string() +
                                  " not found; run generate for scheme=" +
                                  sname + " cell=" + cid);
    synth.push_back(io::read_image(p));
  }

  auto extractor = make_extractor(real);
  double value = metrics::fid(real, synth, *extractor);
  manifest_.event("fid-cell", {{"scheme", sname},
                               {"cell", cid},
                               {"fid", value},
                               {"n_real", n},
                               {"n_synth", n},
                               {"extractor", extractor->id()},
                               {"config", hash_}});
  return value;
}

void Pipeline::run_generation_grid(bool force) {
  ensure_data();
  for (auto scheme : grid_schemes()) {
    train_control(scheme, force);
    for (const auto& cell : grid_rows()) {
      generate_cell(scheme, cell, force);
      eval_fid_cell(scheme, cell, force);
    }
  }
  fs::create_directories(reports_dir());
  write_text(reports_dir() / "fid_grid.md", generation_report_markdown());
  write_text(reports_dir() / "fid_grid.csv", generation_report_csv());
  write_text(reports_dir() / "fid_report.csv", fid_report_csv());
  manifest_.mark_complete("fid-grid", hash_);
}

std::string Pipeline::generation_report_markdown() const {
  auto cached = cached_fid_cells();
  std::string md = "| prompts |";
  for (auto s : grid_schemes())
    md += " " + cond::scheme_name(s) + " |";
  md += "\n| --- |";
  for (size_t i = 0; i < grid_schemes().size(); ++i)
    md += " --- |";
  md += "\n";
  for (const auto& cell : grid_rows()) {
    std::vector<double> vals;
    double best = 0.0;
    bool any = false;
    for (auto s : grid_schemes()) {
      auto it = cached.find(cond::scheme_name(s) + "/" + cell_id(cell));
      if (it == cached.end()) {
        vals.push_back(-1.0);
        continue;
      }
      double v = it->second.value("fid", 0.0);
      vals.push_back(v);
      if (!any || v < best)
        best = v;
      any = true;
    }
    md += "| " + cell_label(cell) + " |";
    for (double v : vals) {
      if (v < 0.0)
        md += " - |";
      else if (any && v == best)
        md += " **" + fmt3(v) + "** |";
      else
        md += " " + fmt3(v) + " |";
    }
    md += "\n";
  }
  md += "\nLower is better; the best scheme per prompt row is bold.\n";
  return md;
}

std::string Pipeline::generation_report_csv() const {
  auto cached = cached_fid_cells();
  std::string csv = "prompts";
  for (auto s : grid_schemes())
    csv += "," + cond::scheme_name(s);
  csv += ",best_scheme\n";
  for (const auto& cell : grid_rows()) {
    csv += cell_label(cell);
    double best = 0.0;
    std::string best_name;
    for (auto s : grid_schemes()) {
      auto it = cached.find(cond::scheme_name(s) + "/" + cell_id(cell));
      if (it == cached.end()) {
        csv += ",";
        continue;
      }
      double v = it->second.value("fid", 0.0);
      csv += "," + fmt3(v);
      if (best_name.empty() || v < best) {
        best = v;
        best_name = cond::scheme_name(s);
      }
    }
    csv += "," + best_name + "\n";
  }
  return csv;
}

std::string Pipeline::fid_report_csv() const {
  auto cached = cached_fid_cells();
  std::string csv =
      "config_id,prompt_regime,condition_scheme,fid,n_real,n_synth,"
      "extractor_id\n";
  for (const auto& cell : grid_rows()) {
    for (auto s : grid_schemes()) {
      auto it = cached.find(cond::scheme_name(s) + "/" + cell_id(cell));
      if (it == cached.end())
        continue;
      const auto& pl = it->second;
      csv += hash_ + "," + cell_label(cell) + "," + cond::scheme_name(s) +
             "," + fmt3(pl.value("fid", 0.0)) + "," +
             std::to_string(pl.value("n_real", 0)) + "," +
             std::to_string(pl.value("n_synth", 0)) + "," +
             pl.value("extractor", "") + "\n";
    }
  }
  csv += "# note: FID is a proxy score and can be unreliable at small sample "
         "sizes; treat comparisons with care.\n";
  return csv;
}

void Pipeline::run_seg_grid(bool force) {
  std::string key = "seg-grid";
  if (!force && manifest_.is_complete(key, hash_) &&
      fs::exists(reports_dir() / "seg_table.md"))
    return;
  ensure_data();
  cond::Scheme scheme = cond::scheme_from_name(cfg_.get("cond.scheme"));
  std::string sname = cond::scheme_name(scheme);
  train_control(scheme, false);

  auto train = load_split("train");
  auto val = load_split("val");
  int corpus_n = std::min<int>(static_cast<int>(cfg_.get_int("seg.corpus_count")),
                               static_cast<int>(train.size()));
  int val_n = std::min<int>(static_cast<int>(cfg_.get_int("seg.val_count")),
                            static_cast<int>(val.size()));
  if (corpus_n < 2 || val_n < 1)
    fail("InvalidArgument", "seg corpus/val too small after clamping to the "
                            "available split sizes");

  auto latent = latent_shape(train);
  auto base = load_or_train_base(false);
  auto cd = load_control(scheme, base, latent);

  prompt::Regime regime =
      prompt::regime_from_name(cfg_.get_or("train.prompt_regime", "fixed"));
  diffusion::IdentityCodec codec;
  auto sched = schedule();
  diffusion::SampleOptions sopts;
  sopts.stochastic = cfg_.get_bool_or("sample.stochastic", false);
  sopts.guidance = cfg_.get_double_or("sample.guidance", 2.0);

  fs::path synth_dir = root_ / "seg" / "synth";
  fs::create_directories(synth_dir);
  auto table = class_table();
  auto rail_ids = parse_id_set(cfg_.get("data.rail_ids"));

  std::vector<seg::SegSample> real_samples, synth_samples, val_samples;
  for (int i = 0; i < corpus_n; ++i) {
    const auto& p = train[i];
    ImageU8 bmask = seg::binarize_mask(p.mask, rail_ids, table);
    real_samples.push_back({p.image, bmask, seg::Origin::Real, i});

    fs::path sp = synth_dir / (stem5(i) + ".png");
    ImageU8 simg;
    if (!force && fs::exists(sp)) {
      simg = io::read_image(sp);
    } else {
      auto pb = bundle_for(p, regime, false);
      Tensor c = condition_tensor(p, scheme);
      RandomStream rng(derive_seed(run_seed(), "seg-synth",
                                   static_cast<uint64_t>(i)));
      Tensor img = diffusion::sample(*cd, codec, sched, latent, pb, &c, rng,
                                     sopts);
      simg = tensor_to_image_signed(img);
      io::write_png(sp, simg);
    }
    synth_samples.push_back({simg, bmask, seg::Origin::Synthetic, i});
  }
  for (int i = 0; i < val_n; ++i) {
    const auto& p = val[i];
    // validation identities live in a separate range so no corpus mask_id
    // can collide with them
    val_samples.push_back({p.image,
                           seg::binarize_mask(p.mask, rail_ids, table),
                           seg::Origin::Real, 1000000 + i});
  }

  std::vector<seg::SetupId> setups;
  for (const auto& s : split_list(cfg_.get("seg.setups")))
    setups.push_back(seg::parse_setup(s));
  std::vector<uint64_t> seeds;
  for (const auto& s : split_list(cfg_.get("seg.seeds")))
    seeds.push_back(std::stoull(s));

  seg::SegTrainConfig tc;
  tc.epochs = static_cast<int>(cfg_.get_int("seg.epochs"));
  tc.batch = static_cast<int>(cfg_.get_int("seg.batch"));
  tc.lr = cfg_.get_double("seg.lr");
  tc.width = static_cast<int>(cfg_.get_int("seg.width"));

  auto rows = seg::run_setup_grid(setups, seeds, real_samples, synth_samples,
                                  val_samples, tc);
  for (const auto& r : rows) {
    manifest_.event("seg-row", {{"setup", seg::setup_name(r.id)},
                                {"n_real", r.n_real},
                                {"n_synth", r.n_synth},
                                {"miou", r.mean},
                                {"std", r.stddev},
                                {"per_seed", r.per_seed},
                                {"config", hash_}});
  }
  fs::create_directories(reports_dir());
  write_text(reports_dir() / "seg_table.md", seg::setup_table_markdown(rows));
  write_text(reports_dir() / "seg_table.csv", seg::setup_table_csv(rows));
  manifest_.event("seg-grid", {{"scheme", sname},
                               {"corpus", corpus_n},
                               {"val", val_n},
                               {"setups", static_cast<int>(setups.size())},
                               {"seeds", static_cast<int>(seeds.size())}});
  manifest_.mark_complete(key, hash_);
}

std::string Pipeline::seg_report_markdown() const {
  std::map<std::string, nlohmann::json> latest;
  for (const auto& ev : manifest_.events()) {
    if (ev.value("kind", "") != "seg-row")
      continue;
    const auto& pl = ev.at("data");
    if (pl.value("config", "") != hash_)
      continue;
    latest[pl.value("setup", "")] = pl;
  }
  if (latest.empty())
    return "";
  std::vector<seg::SetupRow> rows;
  for (const auto& s : split_list(cfg_.get("seg.setups"))) {
    auto it = latest.find(s);
    if (it == latest.end())
      continue;
    seg::SetupRow r;
    r.id = seg::parse_setup(s);
    r.n_real = it->second.value("n_real", 0);
    r.n_synth = it->second.value("n_synth", 0);
    r.mean = it->second.value("miou", 0.0);
    r.stddev = it->second.value("std", 0.0);
    rows.push_back(r);
  }
  return seg::setup_table_markdown(rows);
}

std::string Pipeline::report_all() const {
  std::string md = "# Run report\n\n";
  md += "config hash: `" + hash_ + "`\n";
  md += "run dir: `" + root_.string() + "`\n\n";
  std::string grid = generation_report_markdown();
  md += "## Generation quality (FID; rows = prompt regime, columns = "
        "condition scheme)\n\n";
  md += grid;
  std::string seg_md = seg_report_markdown();
  if (!seg_md.empty()) {
    md += "\n## Rail segmentation transfer (mIoU x100 over seeds)\n\n";
    md += seg_md;
  }
  md += "\nFID here uses a small frozen feature net and few samples; treat "
        "it as a relative signal only.\n";
  return md;
}

} // namespace railgen::exp
