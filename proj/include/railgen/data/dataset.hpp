#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "railgen/core/image.hpp"

namespace railgen::data {

// id -> class name, loaded from a small `id = name` config file
class ClassTable {
public:
  ClassTable() = default;
  explicit ClassTable(std::map<int, std::string> entries);

  static ClassTable from_file(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool contains(int id) const { return entries_.count(id) > 0; }
  const std::string& name(int id) const;
  const std::map<int, std::string>& entries() const { return entries_; }

private:
  std::map<int, std::string> entries_;
};

// the toy class ids used throughout the desk-scale pipeline
inline constexpr int kToyBackground = 0;
inline constexpr int kToyRail = 1;
inline constexpr int kToyPole = 2;
ClassTable toy_class_table();

struct ScenePair {
  ImageU8 image; // H x W x 3
  ImageU8 mask;  // H x W x 1, class ids
  int index = 0;
  std::string source_id;
};

struct DatasetSplit {
  std::vector<ScenePair> train;
  std::vector<ScenePair> val;
  uint64_t seed = 0;
  double ratio = 0.0;
};

// Scans <root>/images/<stem>.{png,jpg,jpeg} against <root>/masks/<stem>.png,
// returns pairs ordered by stem. Masks must be 8-bit single channel with
// every pixel id present in the class table.
std::vector<ScenePair> load_scene_pairs(const std::filesystem::path& root,
                                        const ClassTable& table);

// Centered window, identical for image and mask.
ScenePair center_crop(const ScenePair& pair, int target_h, int target_w);

// Bilinear for the image, nearest-neighbor for the mask (class ids are
// categorical and must not be blended).
ScenePair resize_pair(const ScenePair& pair, int out_h, int out_w);

// |train| = round(ratio * N). seed == 0 keeps native order and takes the
// prefix; any other seed shuffles deterministically first.
DatasetSplit split_dataset(const std::vector<ScenePair>& pairs, double ratio,
                           uint64_t seed);

} // namespace railgen::data
