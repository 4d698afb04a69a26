#include "railgen/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "railgen/core/config.hpp"
#include "railgen/core/error.hpp"
#include "railgen/core/rng.hpp"
#include "railgen/io/image_io.hpp"

namespace railgen::data {

namespace fs = std::filesystem;

ClassTable::ClassTable(std::map<int, std::string> entries)
    : entries_(std::move(entries)) {}

ClassTable ClassTable::from_file(const fs::path& path) {
  KvConfig cfg = KvConfig::from_file(path);
  std::map<int, std::string> entries;
  for (const auto& [k, v] : cfg.entries()) {
    char* end = nullptr;
    long id = std::strtol(k.c_str(), &end, 10);
    if (end == k.c_str() || *end != '\0')
      fail("ConfigError", "class table key is not an id: " + k);
    entries[static_cast<int>(id)] = v;
  }
  if (entries.empty())
    fail("ConfigError", "class table is empty: " + path.string());
  return ClassTable(std::move(entries));
}

void ClassTable::save(const fs::path& path) const {
  KvConfig cfg;
  for (const auto& [id, name] : entries_)
    cfg.set(std::to_string(id), name);
  cfg.save(path);
}

const std::string& ClassTable::name(int id) const {
  auto it = entries_.find(id);
  if (it == entries_.end())
    fail("UnknownClass", "class id " + std::to_string(id) + " not in table");
  return it->second;
}

ClassTable toy_class_table() {
  return ClassTable({{kToyBackground, "background"},
                     {kToyRail, "rail"},
                     {kToyPole, "pole"}});
}

std::vector<ScenePair> load_scene_pairs(const fs::path& root,
                                        const ClassTable& table) {
  fs::path images_dir = root / "images";
  fs::path masks_dir = root / "masks";
  if (!fs::is_directory(images_dir))
    fail("IoError", "missing images directory: " + images_dir.string());
  if (!fs::is_directory(masks_dir))
    fail("IoError", "missing masks directory: " + masks_dir.string());

  std::vector<fs::path> image_files;
  for (const auto& entry : fs::directory_iterator(images_dir)) {
    if (!entry.is_regular_file())
      continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
      image_files.push_back(entry.path());
  }
  // native index order == stem order
  std::sort(image_files.begin(), image_files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.stem().string() < b.stem().string();
            });

  std::vector<ScenePair> pairs;
  pairs.reserve(image_files.size());
  int index = 0;
  for (const auto& img_path : image_files) {
    const std::string stem = img_path.stem().string();
    fs::path mask_path = masks_dir / (stem + ".png");
    if (!fs::exists(mask_path))
      fail("MissingMask", stem);

    ScenePair pair;
    pair.image = io::read_image(img_path);
    pair.mask = io::read_image(mask_path);
    pair.index = index++;
    pair.source_id = stem;

    if (pair.image.c == 1) {
      // expand grayscale photos so downstream always sees 3 channels
      ImageU8 rgb(pair.image.h, pair.image.w, 3);
      for (int y = 0; y < rgb.h; ++y)
        for (int x = 0; x < rgb.w; ++x)
          for (int ch = 0; ch < 3; ++ch)
            rgb.at(y, x, ch) = pair.image.at(y, x, 0);
      pair.image = std::move(rgb);
    }
    if (pair.mask.c != 1)
      fail("InvalidMask", "mask for '" + stem + "' is not single-channel");
    if (!pair.image.same_dims(pair.mask))
      fail("SizeMismatch", "image/mask dimensions differ for '" + stem + "'");
    for (uint8_t id : pair.mask.px)
      if (!table.contains(id))
        fail("UnknownClass", "mask for '" + stem + "' contains id " +
                                 std::to_string(int(id)) +
                                 " absent from the class table");
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

ScenePair center_crop(const ScenePair& pair, int target_h, int target_w) {
  const int h = pair.image.h;
  const int w = pair.image.w;
  if (target_h <= 0 || target_w <= 0 || target_h > h || target_w > w)
    fail("InvalidCrop", "target " + std::to_string(target_h) + "x" +
                            std::to_string(target_w) + " does not fit in " +
                            std::to_string(h) + "x" + std::to_string(w));
  const int y0 = (h - target_h) / 2;
  const int x0 = (w - target_w) / 2;

  ScenePair out;
  out.index = pair.index;
  out.source_id = pair.source_id;
  out.image = ImageU8(target_h, target_w, pair.image.c);
  out.mask = ImageU8(target_h, target_w, 1);
  for (int y = 0; y < target_h; ++y) {
    for (int x = 0; x < target_w; ++x) {
      for (int ch = 0; ch < pair.image.c; ++ch)
        out.image.at(y, x, ch) = pair.image.at(y0 + y, x0 + x, ch);
      out.mask.at(y, x) = pair.mask.at(y0 + y, x0 + x);
    }
  }
  return out;
}

namespace {

// half-pixel-center sampling; identity when sizes match
ImageU8 resize_bilinear(const ImageU8& src, int out_h, int out_w) {
  ImageU8 dst(out_h, out_w, src.c);
  const double sy = static_cast<double>(src.h) / out_h;
  const double sx = static_cast<double>(src.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y1 = std::min(y0 + 1, src.h - 1);
    y0 = std::max(y0, 0);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x1 = std::min(x0 + 1, src.w - 1);
      x0 = std::max(x0, 0);
      for (int ch = 0; ch < src.c; ++ch) {
        double top = (1.0 - wx) * src.at(y0, x0, ch) + wx * src.at(y0, x1, ch);
        double bot = (1.0 - wx) * src.at(y1, x0, ch) + wx * src.at(y1, x1, ch);
        double v = (1.0 - wy) * top + wy * bot;
        dst.at(y, x, ch) = static_cast<uint8_t>(std::lround(
            std::min(255.0, std::max(0.0, v))));
      }
    }
  }
  return dst;
}

ImageU8 resize_nearest(const ImageU8& src, int out_h, int out_w) {
  ImageU8 dst(out_h, out_w, src.c);
  const double sy = static_cast<double>(src.h) / out_h;
  const double sx = static_cast<double>(src.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    int yy = std::min(src.h - 1,
                      static_cast<int>(std::floor((y + 0.5) * sy)));
    for (int x = 0; x < out_w; ++x) {
      int xx = std::min(src.w - 1,
                        static_cast<int>(std::floor((x + 0.5) * sx)));
      for (int ch = 0; ch < src.c; ++ch)
        dst.at(y, x, ch) = src.at(yy, xx, ch);
    }
  }
  return dst;
}

} // namespace

ScenePair resize_pair(const ScenePair& pair, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0)
    fail("InvalidSize", "resize target must be positive");
  ScenePair out;
  out.index = pair.index;
  out.source_id = pair.source_id;
  if (out_h == pair.image.h && out_w == pair.image.w) {
    out.image = pair.image;
    out.mask = pair.mask;
    return out;
  }
  out.image = resize_bilinear(pair.image, out_h, out_w);
  out.mask = resize_nearest(pair.mask, out_h, out_w);
  return out;
}

DatasetSplit split_dataset(const std::vector<ScenePair>& pairs, double ratio,
                           uint64_t seed) {
  if (pairs.empty())
    fail("EmptyDataset", "cannot split an empty dataset");
  if (pairs.size() < 2)
    fail("EmptyDataset", "need at least 2 pairs to split");
  if (!(ratio > 0.0 && ratio < 1.0))
    fail("InvalidArgument", "split ratio must be in (0,1)");

  const size_t n = pairs.size();
  const size_t n_train = static_cast<size_t>(
      std::llround(ratio * static_cast<double>(n)));

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i)
    order[i] = i;
  if (seed != 0) {
    RandomStream rng(derive_seed(seed, "data-shuffle"));
    for (size_t i = n - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
  }

  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;
  split.train.reserve(n_train);
  split.val.reserve(n - n_train);
  for (size_t i = 0; i < n; ++i) {
    const ScenePair& p = pairs[order[i]];
    if (i < n_train)
      split.train.push_back(p);
    else
      split.val.push_back(p);
  }
  return split;
}

} // namespace railgen::data
