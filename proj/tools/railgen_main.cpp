#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "railgen/core/error.hpp"
#include "railgen/exp/pipeline.hpp"

namespace {

using railgen::KvConfig;

struct CliState {
  std::string config_file;
  std::string scale;
  long long seed = 0;
  std::string scheme;
  std::string prompts;
  bool neg = false;
  std::string out;
  std::string captioner_url;
  long long count = 0;
  bool force = false;
  std::string run_dir; // report alias for --out
};

void add_common(CLI::App* sc, CliState& st) {
  sc->add_option("--config", st.config_file, "key=value config file");
  sc->add_option("--scale", st.scale, "desk or paper preset");
  sc->add_option("--seed", st.seed, "root seed for the whole run");
  sc->add_option("--out", st.out, "run directory");
  sc->add_flag("--force", st.force, "redo stages even when marked complete");
}

void add_scheme(CLI::App* sc, CliState& st) {
  sc->add_option("--scheme", st.scheme,
                 "condition scheme: mask, canny, cmb12, cmb21, cmb111");
}

void add_prompts(CLI::App* sc, CliState& st) {
  sc->add_option("--prompts", st.prompts,
                 "prompt regime: none, fixed, caption");
  sc->add_flag("--neg,!--no-neg", st.neg, "toggle negative prompts");
  sc->add_option("--captioner-url", st.captioner_url,
                 "HTTP captioning endpoint (implies prompt.captioner=http)");
}

KvConfig compose_config(CLI::App* sub, const CliState& st) {
  auto given = [sub](const std::string& flag) -> bool {
    const CLI::Option* o = sub->get_option_no_throw(flag);
    return o != nullptr && o->count() > 0;
  };

  KvConfig file_cfg;
  if (!st.config_file.empty())
    file_cfg = KvConfig::from_file(st.config_file);

  std::string scale = "desk";
  if (file_cfg.has("run.scale"))
    scale = file_cfg.get("run.scale");
  if (given("--scale"))
    scale = st.scale;

  KvConfig cfg = railgen::exp::default_config();
  railgen::exp::apply_scale_preset(cfg, scale);
  cfg.merge(file_cfg);
  cfg.set("run.scale", scale);

  if (given("--seed"))
    cfg.set_int("run.seed", st.seed);
  if (given("--out"))
    cfg.set("out.dir", st.out);
  if (given("--run"))
    cfg.set("out.dir", st.run_dir);
  if (given("--scheme"))
    cfg.set("cond.scheme", st.scheme);
  if (given("--prompts"))
    cfg.set("prompt.regime", st.prompts);
  if (given("--neg"))
    cfg.set("prompt.neg", st.neg ? "true" : "false");
  if (given("--captioner-url")) {
    cfg.set("prompt.captioner_url", st.captioner_url);
    cfg.set("prompt.captioner", "http");
  }
  if (given("--n"))
    cfg.set_int("sample.count", st.count);
  return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"railgen: condition-guided railway scene synthesis and its "
               "segmentation payoff"};
  app.require_subcommand(1);
  CliState st;

  auto* toy = app.add_subcommand("make-toy-data",
                                 "render the procedural scene corpus");
  add_common(toy, st);

  auto* prep = app.add_subcommand(
      "prepare-data", "crop/resize/split raw pairs into train and val");
  add_common(prep, st);

  auto* conds = app.add_subcommand(
      "build-conditions", "materialize condition rasters for one scheme");
  add_common(conds, st);
  add_scheme(conds, st);

  auto* trainc = app.add_subcommand(
      "train-control", "train the control branch for one scheme");
  add_common(trainc, st);
  add_scheme(trainc, st);

  auto* gen = app.add_subcommand(
      "generate", "sample images for one scheme and prompt regime");
  add_common(gen, st);
  add_scheme(gen, st);
  add_prompts(gen, st);
  gen->add_option("--n", st.count, "number of images to sample");

  auto* evalf = app.add_subcommand(
      "eval-fid", "score one generated cell against the validation images");
  add_common(evalf, st);
  add_scheme(evalf, st);
  add_prompts(evalf, st);
  evalf->add_option("--n", st.count, "number of images per side");

  auto* seg = app.add_subcommand(
      "train-seg", "run the six real/synthetic corpus setups across seeds");
  add_common(seg, st);
  add_scheme(seg, st);

  auto* grid = app.add_subcommand(
      "run-grid", "full generation grid: train, sample, and score all "
                  "scheme x prompt cells");
  add_common(grid, st);

  auto* rep = app.add_subcommand("report",
                                 "assemble the report from a run directory");
  add_common(rep, st);
  rep->add_option("--run", st.run_dir, "run directory (same as --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    KvConfig cfg = compose_config(sub, st);
    railgen::exp::Pipeline p(cfg);

    const std::string name = sub->get_name();
    if (name == "make-toy-data") {
      p.make_toy_data(st.force);
      std::cout << "toy data under " << p.raw_dir().string() << "\n";
    } else if (name == "prepare-data") {
      p.prepare_data(st.force);
      std::cout << "splits under " << p.data_dir().string() << "\n";
    } else if (name == "build-conditions") {
      auto scheme = railgen::cond::scheme_from_name(cfg.get("cond.scheme"));
      p.build_conditions(scheme, st.force);
      std::cout << "conditions under "
                << (p.root() / "conditions" / railgen::cond::scheme_name(scheme))
                       .string()
                << "\n";
    } else if (name == "train-control") {
      auto scheme = railgen::cond::scheme_from_name(cfg.get("cond.scheme"));
      p.train_control(scheme, st.force);
      std::cout << "control checkpoint under "
                << p.checkpoints_dir().string() << "\n";
    } else if (name == "generate") {
      auto scheme = railgen::cond::scheme_from_name(cfg.get("cond.scheme"));
      railgen::exp::GridCell cell{
          railgen::prompt::regime_from_name(cfg.get("prompt.regime")),
          cfg.get_bool_or("prompt.neg", false)};
      p.generate_cell(scheme, cell, st.force);
      std::cout << "samples under "
                << (p.samples_dir() / railgen::cond::scheme_name(scheme) /
                    railgen::exp::cell_id(cell))
                       .string()
                << "\n";
    } else if (name == "eval-fid") {
      auto scheme = railgen::cond::scheme_from_name(cfg.get("cond.scheme"));
      railgen::exp::GridCell cell{
          railgen::prompt::regime_from_name(cfg.get("prompt.regime")),
          cfg.get_bool_or("prompt.neg", false)};
      double v = p.eval_fid_cell(scheme, cell, st.force);
      std::filesystem::create_directories(p.reports_dir());
      write_file(p.reports_dir() / "fid_report.csv", p.fid_report_csv());
      std::printf("fid %s/%s = %.6f\n",
                  railgen::cond::scheme_name(scheme).c_str(),
                  railgen::exp::cell_id(cell).c_str(), v);
    } else if (name == "train-seg") {
      p.run_seg_grid(st.force);
      std::cout << p.seg_report_markdown();
    } else if (name == "run-grid") {
      p.run_generation_grid(st.force);
      std::cout << p.generation_report_markdown();
    } else if (name == "report") {
      std::string text = p.report_all();
      std::filesystem::create_directories(p.reports_dir());
      write_file(p.reports_dir() / "report.md", text);
      std::cout << text;
    }
  } catch (const railgen::Error& e) {
    std::cerr << "error [" << e.code() << "] " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error " << e.what() << "\n";
    return 1;
  }
  return 0;
}
