#include "railgen/exp/config.hpp"

#include <sstream>

#include "railgen/core/error.hpp"

namespace railgen::exp {

KvConfig default_config() {
  KvConfig c;
  c.set("run.seed", "7");
  c.set("run.scale", "desk");
  c.set("out.dir", "runs/dev");

  c.set("data.source", "toy");  // toy | folder
  c.set("data.root", "");       // empty -> <out.dir>/raw
  c.set("data.toy_count", "48");
  c.set("data.toy_height", "32");
  c.set("data.toy_width", "32");
  c.set("data.crop_height", "0");  // 0 -> no crop
  c.set("data.crop_width", "0");
  c.set("data.resize", "0");  // 0 -> keep size
  c.set("data.split_ratio", "0.8");
  c.set("data.split_seed", "0");  // 0 -> native order prefix
  c.set("data.rail_ids", "1");

  c.set("cond.scheme", "mask");
  c.set("cond.canny_sigma", "1.4");
  c.set("cond.canny_low", "50");
  c.set("cond.canny_high", "150");

  c.set("prompt.regime", "fixed");
  c.set("prompt.neg", "false");
  c.set("prompt.fixed_text", "a railway scene");
  c.set("prompt.decorator", "default");  // default | short | off
  c.set("prompt.captioner", "stub");     // stub | http
  c.set("prompt.captioner_url", "http://127.0.0.1:8089");

  c.set("schedule.kind", "linear");
  c.set("schedule.T", "50");
  c.set("schedule.beta_start", "0.0001");
  c.set("schedule.beta_end", "0.02");

  c.set("model.width", "8");
  c.set("model.emb_dim", "32");
  c.set("model.prompt_buckets", "64");

  c.set("control.blocks", "enc0,enc1,enc2,enc3");
  c.set("control.encoder_width", "8");
  c.set("control.clone_prompt", "true");

  c.set("train.base_steps", "120");
  c.set("train.steps", "240");
  c.set("train.batch", "4");
  c.set("train.lr", "0.002");
  c.set("train.prompt_regime", "fixed");

  c.set("sample.count", "6");
  c.set("sample.guidance", "2.0");
  c.set("sample.stochastic", "false");

  c.set("fid.extractor", "desk");
  c.set("fid.extractor_seed", "101");

  c.set("seg.corpus_count", "24");
  c.set("seg.val_count", "8");
  c.set("seg.epochs", "12");
  c.set("seg.batch", "4");
  c.set("seg.lr", "0.002");
  c.set("seg.width", "8");
  c.set("seg.seeds", "1,2,3");
  c.set("seg.setups", "A,B,C,D,E,F");
  return c;
}

void apply_scale_preset(KvConfig& cfg, const std::string& scale) {
  if (scale == "desk") {
    cfg.set("run.scale", "desk");
    return;
  }
  if (scale != "paper")
    fail("InvalidArgument", "run.scale must be desk or paper, got " + scale);
  cfg.set("run.scale", "paper");
  cfg.set("data.source", "folder");
  cfg.set("data.crop_height", "1080");
  cfg.set("data.crop_width", "1080");
  cfg.set("data.resize", "512");
  // common ids for the raised/track rail classes; adjust to the label map
  cfg.set("data.rail_ids", "12,17");
  cfg.set("schedule.T", "1000");
  cfg.set("model.width", "64");
  cfg.set("train.base_steps", "0");  // expects a pretrained base checkpoint
  cfg.set("train.steps", "22100");   // 13 epochs x batch 4 over 6800 images
  cfg.set("train.batch", "4");
  cfg.set("train.lr", "0.00001");
  cfg.set("sample.count", "1700");
  cfg.set("seg.corpus_count", "3000");
  cfg.set("seg.val_count", "500");
  cfg.set("seg.epochs", "40");
  cfg.set("seg.batch", "4");
  cfg.set("seg.lr", "0.0001");
  cfg.set("seg.width", "32");
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(csv);
  while (std::getline(is, item, ',')) {
    size_t a = item.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    size_t b = item.find_last_not_of(" \t");
    out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

std::set<int> parse_id_set(const std::string& csv) {
  std::set<int> out;
  for (const auto& s : split_list(csv)) {
    try {
      out.insert(std::stoi(s));
    } catch (const std::exception&) {
      fail("InvalidArgument", "bad id in list: " + s);
    }
  }
  return out;
}

namespace {

bool one_of(const std::string& v, std::initializer_list<const char*> opts) {
  for (const char* o : opts)
    if (v == o) return true;
  return false;
}

} // namespace

std::vector<std::string> validate_config(const KvConfig& cfg) {
  std::vector<std::string> bad;
  auto complain = [&bad](const std::string& field, const std::string& why) {
    bad.push_back(field + ": " + why);
  };

  if (!one_of(cfg.get_or("run.scale", "desk"), {"desk", "paper"}))
    complain("run.scale", "must be desk or paper");
  if (!one_of(cfg.get_or("data.source", "toy"), {"toy", "folder"}))
    complain("data.source", "must be toy or folder");

  double ratio = cfg.get_double_or("data.split_ratio", 0.8);
  if (!(ratio > 0.0 && ratio < 1.0))
    complain("data.split_ratio", "must lie strictly between 0 and 1");

  int ch = static_cast<int>(cfg.get_int_or("data.crop_height", 0));
  int cw = static_cast<int>(cfg.get_int_or("data.crop_width", 0));
  if (ch < 0 || cw < 0 || (ch == 0) != (cw == 0))
    complain("data.crop_height", "crop dims must both be 0 or both positive");

  if (!one_of(cfg.get_or("cond.scheme", "mask"),
              {"mask", "canny", "cmb12", "cmb21", "cmb111"}))
    complain("cond.scheme", "must be one of mask,canny,cmb12,cmb21,cmb111");
  double lo = cfg.get_double_or("cond.canny_low", 50);
  double hi = cfg.get_double_or("cond.canny_high", 150);
  if (!(lo >= 0) || !(hi > lo))
    complain("cond.canny_low", "thresholds need 0 <= low < high");
  if (!(cfg.get_double_or("cond.canny_sigma", 1.4) > 0))
    complain("cond.canny_sigma", "must be positive");

  if (!one_of(cfg.get_or("prompt.regime", "fixed"),
              {"none", "fixed", "caption"}))
    complain("prompt.regime", "must be none, fixed, or caption");
  if (!one_of(cfg.get_or("prompt.decorator", "default"),
              {"default", "short", "off"}))
    complain("prompt.decorator", "must be default, short, or off");
  if (!one_of(cfg.get_or("prompt.captioner", "stub"), {"stub", "http"}))
    complain("prompt.captioner", "must be stub or http");

  if (cfg.get_or("schedule.kind", "linear") != "linear")
    complain("schedule.kind", "only linear is available");
  long long T = cfg.get_int_or("schedule.T", 25);
  if (T < 1) complain("schedule.T", "must be >= 1");
  double b0 = cfg.get_double_or("schedule.beta_start", 1e-4);
  double b1 = cfg.get_double_or("schedule.beta_end", 0.02);
  if (!(b0 > 0 && b0 <= b1 && b1 < 1))
    complain("schedule.beta_start", "betas need 0 < start <= end < 1");

  if (cfg.get_int_or("model.width", 8) < 2)
    complain("model.width", "must be >= 2");
  if (cfg.get_int_or("model.emb_dim", 32) < 2)
    complain("model.emb_dim", "must be >= 2");
  if (cfg.get_int_or("model.prompt_buckets", 64) < 1)
    complain("model.prompt_buckets", "must be >= 1");

  if (cfg.get_int_or("train.batch", 4) < 1)
    complain("train.batch", "must be >= 1");
  if (!(cfg.get_double_or("train.lr", 1e-3) > 0))
    complain("train.lr", "must be positive");
  if (!one_of(cfg.get_or("train.prompt_regime", "fixed"),
              {"none", "fixed", "caption"}))
    complain("train.prompt_regime", "must be none, fixed, or caption");

  if (cfg.get_int_or("sample.count", 6) < 2)
    complain("sample.count", "fid needs at least 2 samples");
  if (!(cfg.get_double_or("sample.guidance", 2.0) > 0))
    complain("sample.guidance", "must be positive");

  if (!one_of(cfg.get_or("fid.extractor", "desk"), {"desk", "identity"}))
    complain("fid.extractor", "must be desk or identity");

  if (cfg.get_int_or("seg.corpus_count", 24) < 2)
    complain("seg.corpus_count", "must be >= 2");
  if (cfg.get_int_or("seg.val_count", 8) < 1)
    complain("seg.val_count", "must be >= 1");
  if (cfg.get_int_or("seg.epochs", 12) < 1)
    complain("seg.epochs", "must be >= 1");
  if (cfg.get_int_or("seg.batch", 4) < 1)
    complain("seg.batch", "must be >= 1");
  if (!(cfg.get_double_or("seg.lr", 1e-3) > 0))
    complain("seg.lr", "must be positive");
  if (split_list(cfg.get_or("seg.seeds", "1,2,3")).empty())
    complain("seg.seeds", "needs at least one seed");
  for (const auto& s : split_list(cfg.get_or("seg.setups", "A,B,C,D,E,F")))
    if (!one_of(s, {"A", "B", "C", "D", "E", "F"}))
      complain("seg.setups", "unknown setup " + s);

  try {
    parse_id_set(cfg.get_or("data.rail_ids", "1"));
  } catch (const Error&) {
    complain("data.rail_ids", "must be a comma-separated id list");
  }
  return bad;
}

} // namespace railgen::exp
