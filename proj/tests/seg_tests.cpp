#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "railgen/core/error.hpp"
#include "railgen/data/toy.hpp"
#include "railgen/seg/seg.hpp"

using namespace railgen;
using namespace railgen::seg;

namespace {

std::string thrown_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

data::ToyOptions small_scene() {
  data::ToyOptions opts;
  opts.height = 32;
  opts.width = 32;
  return opts;
}

// Real/synth SegSample lists aligned by mask_id, plus a disjoint val set.
struct SegFixture {
  std::vector<SegSample> real, synth, val;

  SegFixture(int n, int n_val, uint64_t seed) {
    auto table = data::toy_class_table();
    auto pairs = data::generate_toy_dataset(n, seed, small_scene());
    for (const auto& p : pairs) {
      SegSample r;
      r.image = p.image;
      r.binary_mask = binarize_mask(p.mask, {data::kToyRail}, table);
      r.origin = Origin::Real;
      r.mask_id = p.index;

      SegSample s;
      s.image = data::render_scene_for_mask(
          p.mask, seed + 7000 + static_cast<uint64_t>(p.index));
      s.binary_mask = r.binary_mask;
      s.origin = Origin::Synthetic;
      s.mask_id = r.mask_id;

      real.push_back(std::move(r));
      synth.push_back(std::move(s));
    }
    auto vp = data::generate_toy_dataset(n_val, seed + 1, small_scene());
    for (const auto& p : vp) {
      SegSample v;
      v.image = p.image;
      v.binary_mask = binarize_mask(p.mask, {data::kToyRail}, table);
      v.origin = Origin::Real;
      v.mask_id = 1000000 + p.index;
      val.push_back(std::move(v));
    }
  }
};

SegSample dummy_sample(int mask_id, Origin origin) {
  SegSample s;
  s.image = ImageU8(4, 4, 3, 0);
  s.binary_mask = ImageU8(4, 4, 1, 0);
  s.origin = origin;
  s.mask_id = mask_id;
  return s;
}

std::vector<SegSample> dummy_set(int n, Origin origin) {
  std::vector<SegSample> out;
  for (int i = 0; i < n; ++i)
    out.push_back(dummy_sample(i, origin));
  return out;
}

int unique_ids(const std::vector<SegSample>& corpus) {
  std::set<int> ids;
  for (const auto& s : corpus)
    ids.insert(s.mask_id);
  return static_cast<int>(ids.size());
}

int count_origin(const std::vector<SegSample>& corpus, Origin o) {
  int n = 0;
  for (const auto& s : corpus)
    if (s.origin == o) ++n;
  return n;
}

} // namespace

TEST_CASE("binarize keeps exactly the requested class ids") {
  auto table = data::toy_class_table();
  auto pair = data::generate_toy_scene(0, 5, small_scene());

  ImageU8 none = binarize_mask(pair.mask, {}, table);
  for (auto p : none.px)
    CHECK(p == 0);

  ImageU8 all = binarize_mask(
      pair.mask, {data::kToyBackground, data::kToyRail, data::kToyPole}, table);
  for (auto p : all.px)
    CHECK(p == 1);

  // foreground count must equal a direct count of rail-id pixels
  ImageU8 rails = binarize_mask(pair.mask, {data::kToyRail}, table);
  size_t want = 0, got = 0;
  for (size_t i = 0; i < pair.mask.px.size(); ++i) {
    if (pair.mask.px[i] == data::kToyRail) ++want;
    if (rails.px[i] == 1) ++got;
    CHECK((rails.px[i] == 0 || rails.px[i] == 1));
  }
  CHECK(got == want);
  CHECK(want > 0);

  CHECK(thrown_code([&] { binarize_mask(pair.mask, {9}, table); }) ==
        "UnknownClass");
  CHECK(thrown_code([&] { binarize_mask(pair.image, {1}, table); }) ==
        "InvalidMask");
}

TEST_CASE("setup names round trip") {
  for (char c = 'A'; c <= 'F'; ++c) {
    std::string name(1, c);
    CHECK(setup_name(parse_setup(name)) == name);
  }
  CHECK(thrown_code([] { parse_setup("G"); }) == "InvalidArgument");
  CHECK(thrown_code([] { parse_setup("AB"); }) == "InvalidArgument");
}

TEST_CASE("setup composition counts at a scaled size") {
  const int n = 30;
  auto real = dummy_set(n, Origin::Real);
  auto synth = dummy_set(n, Origin::Synthetic);

  auto a = build_setup(SetupId::A, real, synth);
  CHECK(a.size() == 30);
  CHECK(count_origin(a, Origin::Real) == 30);
  CHECK(unique_ids(a) == 30);

  auto b = build_setup(SetupId::B, real, synth);
  CHECK(b.size() == 30);
  CHECK(count_origin(b, Origin::Synthetic) == 30);

  auto c = build_setup(SetupId::C, real, synth);
  CHECK(c.size() == 60);
  CHECK(count_origin(c, Origin::Real) == 30);
  CHECK(count_origin(c, Origin::Synthetic) == 30);
  CHECK(unique_ids(c) == 30);

  auto d = build_setup(SetupId::D, real, synth);
  CHECK(d.size() == 30);
  CHECK(count_origin(d, Origin::Real) == 15);
  CHECK(count_origin(d, Origin::Synthetic) == 15);
  CHECK(unique_ids(d) == 15);

  auto e = build_setup(SetupId::E, real, synth);
  CHECK(e.size() == 30);
  CHECK(unique_ids(e) == 30);
  for (int i = 0; i < 15; ++i) {
    CHECK(e[static_cast<size_t>(i)].origin == Origin::Real);
    CHECK(e[static_cast<size_t>(15 + i)].origin == Origin::Synthetic);
    CHECK(e[static_cast<size_t>(i)].mask_id == i);
    CHECK(e[static_cast<size_t>(15 + i)].mask_id == 15 + i);
  }

  auto f = build_setup(SetupId::F, real, synth);
  CHECK(f.size() == 30);
  CHECK(unique_ids(f) == 30);
  for (int i = 0; i < 15; ++i) {
    CHECK(f[static_cast<size_t>(i)].origin == Origin::Synthetic);
    CHECK(f[static_cast<size_t>(15 + i)].origin == Origin::Real);
  }
}

TEST_CASE("setup composition counts at full scale") {
  const int n = 3000;
  auto real = dummy_set(n, Origin::Real);
  auto synth = dummy_set(n, Origin::Synthetic);

  CHECK(build_setup(SetupId::A, real, synth).size() == 3000);
  CHECK(build_setup(SetupId::B, real, synth).size() == 3000);

  auto c = build_setup(SetupId::C, real, synth);
  CHECK(c.size() == 6000);
  CHECK(unique_ids(c) == 3000);

  auto d = build_setup(SetupId::D, real, synth);
  CHECK(d.size() == 3000);
  CHECK(unique_ids(d) == 1500);

  auto e = build_setup(SetupId::E, real, synth);
  CHECK(e.size() == 3000);
  CHECK(unique_ids(e) == 3000);
  CHECK(count_origin(e, Origin::Real) == 1500);

  auto f = build_setup(SetupId::F, real, synth);
  CHECK(f.size() == 3000);
  CHECK(unique_ids(f) == 3000);
  CHECK(count_origin(f, Origin::Synthetic) == 1500);
}

TEST_CASE("setup composition rejects misalignment") {
  auto real = dummy_set(8, Origin::Real);
  auto synth = dummy_set(8, Origin::Synthetic);
  std::swap(synth[2], synth[5]);
  CHECK(thrown_code([&] { build_setup(SetupId::A, real, synth); }) ==
        "AlignmentError");

  auto shorter = dummy_set(7, Origin::Synthetic);
  CHECK(thrown_code([&] {
          build_setup(SetupId::A, real, shorter);
        }) == "AlignmentError");
  CHECK(thrown_code([&] { build_setup(SetupId::A, {}, {}); }) ==
        "AlignmentError");
}

TEST_CASE("an untrained segmenter scores poorly on toy rails") {
  SegFixture fix(4, 16, 900);
  SegUNet model({3, 8}, 1);
  double miou = evaluate_miou(model, fix.val);
  CHECK(miou >= 0.0);
  CHECK(miou < 0.2);
}

TEST_CASE("training on the toy corpus clears 0.6 mIoU") {
  SegFixture fix(200, 20, 901);
  SegTrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch = 4;
  cfg.lr = 1e-3f;
  cfg.width = 8;
  auto [model, res] = train_segmenter(fix.real, fix.val, cfg, 7);
  CHECK(res.best_miou > 0.6);
  CHECK(res.best_epoch >= 0);
  CHECK(res.epoch_losses.size() == 20);
  CHECK(res.epoch_mious.size() == 20);
  CHECK(res.final_miou <= res.best_miou);
}

TEST_CASE("training replays exactly under a fixed seed") {
  SegFixture fix(16, 6, 902);
  SegTrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 4;
  cfg.width = 4;

  auto [m1, r1] = train_segmenter(fix.real, fix.val, cfg, 11);
  auto [m2, r2] = train_segmenter(fix.real, fix.val, cfg, 11);
  auto [m3, r3] = train_segmenter(fix.real, fix.val, cfg, 12);
  CHECK(std::abs(r1.final_miou - r2.final_miou) <= 1e-4);
  REQUIRE(r1.epoch_losses.size() == r2.epoch_losses.size());
  for (size_t i = 0; i < r1.epoch_losses.size(); ++i)
    CHECK(r1.epoch_losses[i] == doctest::Approx(r2.epoch_losses[i]).epsilon(1e-9));
  CHECK(r1.epoch_losses != r3.epoch_losses);
}

TEST_CASE("training refuses leaked or empty inputs") {
  SegFixture fix(8, 4, 903);
  SegTrainConfig cfg;
  cfg.epochs = 1;

  auto leaked = fix.val;
  leaked[0].mask_id = fix.real[3].mask_id;
  CHECK(thrown_code([&] { train_segmenter(fix.real, leaked, cfg, 1); }) ==
        "LeakageError");
  CHECK(thrown_code([&] { train_segmenter({}, fix.val, cfg, 1); }) ==
        "InvalidArgument");
  CHECK(thrown_code([&] { train_segmenter(fix.real, {}, cfg, 1); }) ==
        "InvalidArgument");
}

TEST_CASE("the setup grid reports per-seed scores in range") {
  SegFixture fix(8, 4, 904);
  SegTrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 4;
  cfg.width = 4;

  auto rows = run_setup_grid({SetupId::A, SetupId::D}, {5, 5, 5}, fix.real,
                             fix.synth, fix.val, cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].id == SetupId::A);
  CHECK(rows[0].n_real == 8);
  CHECK(rows[0].n_synth == 0);
  CHECK(rows[1].n_real == 4);
  CHECK(rows[1].n_synth == 4);
  for (const auto& r : rows) {
    REQUIRE(r.per_seed.size() == 3);
    // identical seeds: identical scores, zero spread
    CHECK(r.per_seed[0] == r.per_seed[1]);
    CHECK(r.stddev == 0.0);
    CHECK(r.mean >= 0.0);
    CHECK(r.mean <= 100.0);
    CHECK(r.mean == doctest::Approx(r.per_seed[0]));
  }

  CHECK(thrown_code([&] {
          run_setup_grid({SetupId::A}, {}, fix.real, fix.synth, fix.val, cfg);
        }) == "InvalidArgument");
}

TEST_CASE("setup tables carry six rows and five columns") {
  std::vector<SetupRow> rows;
  for (int i = 0; i < 6; ++i) {
    SetupRow r;
    r.id = static_cast<SetupId>(i);
    r.n_real = 3000 - i;
    r.n_synth = i;
    r.mean = 78.0 + i;
    r.stddev = 0.5;
    r.per_seed = {r.mean, r.mean, r.mean};
    rows.push_back(r);
  }

  std::string md = setup_table_markdown(rows);
  std::istringstream ms(md);
  std::string line;
  int nlines = 0;
  while (std::getline(ms, line)) {
    ++nlines;
    CHECK(std::count(line.begin(), line.end(), '|') == 6); // 5 columns
  }
  CHECK(nlines == 8); // header + separator + 6 rows
  CHECK(md.find("| Setup | # Real | # Synthetic | mIoU | Std |") !=
        std::string::npos);
  CHECK(md.find("| A | 3000 | 0 | 78.000 | 0.500 |") != std::string::npos);

  std::string csv = setup_table_csv(rows);
  std::istringstream cs(csv);
  nlines = 0;
  while (std::getline(cs, line)) {
    ++nlines;
    CHECK(std::count(line.begin(), line.end(), ',') == 4);
  }
  CHECK(nlines == 7); // header + 6 rows
  CHECK(csv.rfind("setup,n_real,n_synthetic,miou,std\n", 0) == 0);
  CHECK(csv.find("F,2995,5,83.000,0.500") != std::string::npos);
}
