#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace railgen {

// Append-only run log: one JSON object per line in <dir>/manifest.jsonl.
// All writes go through a single serialized writer.
class Manifest {
public:
  explicit Manifest(std::filesystem::path run_dir);

  void event(const std::string& kind, nlohmann::json payload);

  // convenience for the completion marker used by resume logic
  void mark_complete(const std::string& stage, const std::string& config_hash);
  bool is_complete(const std::string& stage, const std::string& config_hash) const;

  std::vector<nlohmann::json> events() const;

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path file() const { return dir_ / "manifest.jsonl"; }

private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

std::string iso_timestamp_utc();

} // namespace railgen
