#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "railgen/core/error.hpp"
#include "railgen/data/dataset.hpp"
#include "railgen/data/toy.hpp"
#include "railgen/io/image_io.hpp"

using namespace railgen;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("railgen-data-" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ImageU8 gradient_image(int h, int w, int c) {
  ImageU8 img(h, w, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k)
        img.at(y, x, k) = static_cast<uint8_t>((x * 7 + y * 13 + k * 31) % 251);
  return img;
}

// 1x1 pairs: enough to drive the split logic at real corpus sizes cheaply
std::vector<data::ScenePair> tiny_pairs(int n) {
  std::vector<data::ScenePair> out;
  for (int i = 0; i < n; ++i) {
    data::ScenePair p;
    p.image = ImageU8(1, 1, 3);
    p.mask = ImageU8(1, 1, 1);
    p.index = i;
    p.source_id = "p" + std::to_string(i);
    out.push_back(p);
  }
  return out;
}

} // namespace

TEST_CASE("png round trip preserves every pixel, gray and color") {
  auto dir = temp_dir("png");
  for (int c : {1, 3}) {
    ImageU8 img = gradient_image(21, 17, c);
    fs::path p = dir / ("img" + std::to_string(c) + ".png");
    io::write_png(p, img);
    ImageU8 back = io::read_image(p);
    REQUIRE(back.h == img.h);
    REQUIRE(back.w == img.w);
    REQUIRE(back.c == img.c);
    CHECK(back.px == img.px);
  }
}

TEST_CASE("png encoding is byte-deterministic") {
  ImageU8 img = gradient_image(16, 16, 3);
  CHECK(io::encode_png(img) == io::encode_png(img));
}

TEST_CASE("read_image rejects missing and non-image files") {
  auto dir = temp_dir("badio");
  CHECK_THROWS_AS(io::read_image(dir / "nope.png"), Error);
  {
    std::ofstream f(dir / "junk.png", std::ios::binary);
    f << "this is not a png";
  }
  CHECK_THROWS_AS(io::read_image(dir / "junk.png"), Error);
}

TEST_CASE("toy scenes are deterministic and draw all three classes") {
  data::ToyOptions opts;
  auto a = data::generate_toy_scene(3, 123, opts);
  auto b = data::generate_toy_scene(3, 123, opts);
  CHECK(a.image.px == b.image.px);
  CHECK(a.mask.px == b.mask.px);
  auto c = data::generate_toy_scene(3, 124, opts);
  CHECK(a.image.px != c.image.px);

  std::set<uint8_t> classes;
  int n = 0;
  for (uint8_t v : a.mask.px) {
    classes.insert(v);
    ++n;
  }
  CHECK(classes.count(data::kToyBackground) == 1);
  CHECK(classes.count(data::kToyRail) == 1);
  for (uint8_t v : classes)
    CHECK(v <= data::kToyPole);

  // two rails, each about w/22 wide over ~3/4 of the height
  int rail = 0;
  for (uint8_t v : a.mask.px)
    rail += (v == data::kToyRail);
  double frac = static_cast<double>(rail) / n;
  CHECK(frac > 0.01);
  CHECK(frac < 0.25);
}

TEST_CASE("rail-free toy scenes have background-only masks") {
  data::ToyOptions opts;
  opts.rail_free = true;
  auto p = data::generate_toy_scene(0, 9, opts);
  for (uint8_t v : p.mask.px)
    CHECK(v == data::kToyBackground);
}

TEST_CASE("toy dataset indexes pairs and respects requested size") {
  auto pairs = data::generate_toy_dataset(5, 77, {});
  REQUIRE(pairs.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(pairs[i].index == i);
    CHECK(pairs[i].image.c == 3);
    CHECK(pairs[i].mask.c == 1);
    CHECK(pairs[i].image.h == pairs[i].mask.h);
  }
  // per-index independence: same index, same seed -> same scene
  auto again = data::generate_toy_dataset(5, 77, {});
  CHECK(pairs[4].image.px == again[4].image.px);
}

TEST_CASE("class table contains the toy classes") {
  auto t = data::toy_class_table();
  CHECK(t.contains(data::kToyBackground));
  CHECK(t.contains(data::kToyRail));
  CHECK(t.contains(data::kToyPole));
  CHECK_FALSE(t.contains(99));
}

TEST_CASE("class table save/load round trip") {
  auto dir = temp_dir("classes");
  auto t = data::toy_class_table();
  t.save(dir / "classes.txt");
  auto back = data::ClassTable::from_file(dir / "classes.txt");
  CHECK(back.contains(data::kToyRail));
  CHECK(back.name(data::kToyRail) == t.name(data::kToyRail));
  CHECK_FALSE(back.contains(99));
}

TEST_CASE("scene pairs load sorted by stem and reject orphans") {
  auto dir = temp_dir("pairs");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  auto table = data::toy_class_table();
  for (int i : {2, 0, 1}) {
    auto p = data::generate_toy_scene(i, 5, {});
    std::string stem = "s" + std::to_string(i);
    io::write_png(dir / "images" / (stem + ".png"), p.image);
    io::write_png(dir / "masks" / (stem + ".png"), p.mask);
  }
  auto pairs = data::load_scene_pairs(dir, table);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].source_id == "s0");
  CHECK(pairs[1].source_id == "s1");
  CHECK(pairs[2].source_id == "s2");
  CHECK(pairs[0].index == 0);
  CHECK(pairs[2].index == 2);

  io::write_png(dir / "images" / "orphan.png", gradient_image(8, 8, 3));
  CHECK_THROWS_AS(data::load_scene_pairs(dir, table), Error);
}

TEST_CASE("masks with ids outside the class table are rejected") {
  auto dir = temp_dir("badmask");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  ImageU8 img = gradient_image(8, 8, 3);
  ImageU8 mask(8, 8, 1, 200); // not a toy class
  io::write_png(dir / "images" / "a.png", img);
  io::write_png(dir / "masks" / "a.png", mask);
  CHECK_THROWS_AS(data::load_scene_pairs(dir, data::toy_class_table()), Error);
}

TEST_CASE("center crop keeps the exact central window") {
  // 1920x1080 -> 1080x1080 must retain columns [420, 1500)
  data::ScenePair p;
  p.image = ImageU8(1080, 1920, 3);
  p.mask = ImageU8(1080, 1920, 1);
  for (int y = 0; y < 1080; ++y)
    for (int x = 0; x < 1920; ++x) {
      p.image.at(y, x, 0) = static_cast<uint8_t>(x % 256);
      p.image.at(y, x, 1) = static_cast<uint8_t>((x / 256) % 256);
      p.image.at(y, x, 2) = static_cast<uint8_t>(y % 256);
      p.mask.at(y, x) = static_cast<uint8_t>((x + y) % 3);
    }
  auto c = data::center_crop(p, 1080, 1080);
  REQUIRE(c.image.h == 1080);
  REQUIRE(c.image.w == 1080);
  REQUIRE(c.mask.h == 1080);
  bool ok = true;
  for (int y = 0; y < 1080 && ok; ++y)
    for (int x = 0; x < 1080 && ok; ++x) {
      int sx = x + 420;
      ok = c.image.at(y, x, 0) == static_cast<uint8_t>(sx % 256) &&
           c.image.at(y, x, 1) == static_cast<uint8_t>((sx / 256) % 256) &&
           c.image.at(y, x, 2) == static_cast<uint8_t>(y % 256) &&
           c.mask.at(y, x) == static_cast<uint8_t>((sx + y) % 3);
    }
  CHECK(ok);
}

TEST_CASE("center crop rejects windows larger than the source") {
  data::ScenePair p;
  p.image = ImageU8(10, 10, 3);
  p.mask = ImageU8(10, 10, 1);
  CHECK_THROWS_AS(data::center_crop(p, 11, 4), Error);
  CHECK_THROWS_AS(data::center_crop(p, 4, 11), Error);
}

TEST_CASE("resize keeps masks categorical via nearest neighbor") {
  data::ScenePair p;
  p.image = gradient_image(16, 16, 3);
  p.mask = ImageU8(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      p.mask.at(y, x) = static_cast<uint8_t>((x < 8) ? 0 : 7);
  auto r = data::resize_pair(p, 8, 8);
  REQUIRE(r.mask.h == 8);
  std::set<uint8_t> vals(r.mask.px.begin(), r.mask.px.end());
  for (uint8_t v : vals)
    CHECK((v == 0 || v == 7)); // no blended ids
  // nearest-neighbor oracle: downsample by 2 picks source pixel (2y, 2x)
  // within one step; halves stay on their side
  CHECK(r.mask.at(3, 0) == 0);
  CHECK(r.mask.at(3, 7) == 7);
}

TEST_CASE("resize upscale round trips pixel identity on flat regions") {
  data::ScenePair p;
  p.image = ImageU8(4, 4, 3, 120);
  p.mask = ImageU8(4, 4, 1, 2);
  auto r = data::resize_pair(p, 12, 12);
  for (uint8_t v : r.image.px)
    CHECK(v == 120);
  for (uint8_t v : r.mask.px)
    CHECK(v == 2);
}

TEST_CASE("an 8500-item index splits to exactly 6800/1700 at ratio 0.8") {
  auto pairs = tiny_pairs(8500);
  auto split = data::split_dataset(pairs, 0.8, 0);
  CHECK(split.train.size() == 6800);
  CHECK(split.val.size() == 1700);
  // seed 0 keeps native order: train is the prefix
  CHECK(split.train.front().source_id == "p0");
  CHECK(split.val.front().source_id == "p6800");
}

TEST_CASE("shuffled splits are deterministic, disjoint, and complete") {
  auto pairs = tiny_pairs(100);
  auto a = data::split_dataset(pairs, 0.8, 17);
  auto b = data::split_dataset(pairs, 0.8, 17);
  auto c = data::split_dataset(pairs, 0.8, 18);
  REQUIRE(a.train.size() == 80);
  REQUIRE(a.val.size() == 20);
  auto ids = [](const data::DatasetSplit& s) {
    std::vector<std::string> v;
    for (const auto& p : s.train)
      v.push_back(p.source_id);
    for (const auto& p : s.val)
      v.push_back(p.source_id);
    return v;
  };
  CHECK(ids(a) == ids(b));
  CHECK(ids(a) != ids(c));
  std::set<std::string> seen;
  for (const auto& id : ids(a))
    CHECK(seen.insert(id).second); // no duplicates
  CHECK(seen.size() == 100);
  // seed 17 actually shuffles
  bool moved = false;
  for (size_t i = 0; i < a.train.size() && !moved; ++i)
    moved = a.train[i].source_id != pairs[i].source_id;
  CHECK(moved);
}

TEST_CASE("split rejects bad ratios and empty input") {
  auto pairs = tiny_pairs(10);
  CHECK_THROWS_AS(data::split_dataset(pairs, 0.0, 0), Error);
  CHECK_THROWS_AS(data::split_dataset(pairs, 1.0, 0), Error);
  CHECK_THROWS_AS(data::split_dataset({}, 0.8, 0), Error);
}

TEST_CASE("render_scene_for_mask varies texture but keeps geometry") {
  auto p = data::generate_toy_scene(1, 42, {});
  auto img1 = data::render_scene_for_mask(p.mask, 1);
  auto img2 = data::render_scene_for_mask(p.mask, 2);
  REQUIRE(img1.h == p.mask.h);
  REQUIRE(img1.c == 3);
  CHECK(img1.px != img2.px);
  CHECK(data::render_scene_for_mask(p.mask, 1).px == img1.px);
}
