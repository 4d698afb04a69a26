#include "railgen/core/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "railgen/core/error.hpp"

namespace railgen {

Manifest::Manifest(std::filesystem::path run_dir) : dir_(std::move(run_dir)) {
  std::filesystem::create_directories(dir_);
}

void Manifest::event(const std::string& kind, nlohmann::json payload) {
  std::lock_guard<std::mutex> lock(mu_);
  nlohmann::json rec;
  rec["ts"] = iso_timestamp_utc();
  rec["kind"] = kind;
  rec["data"] = std::move(payload);
  std::ofstream out(file(), std::ios::app);
  if (!out)
    fail("ManifestError", "cannot append to " + file().string());
  out << rec.dump() << "\n";
}

void Manifest::mark_complete(const std::string& stage,
                             const std::string& config_hash) {
  event("complete", {{"stage", stage}, {"config_hash", config_hash}});
}

bool Manifest::is_complete(const std::string& stage,
                           const std::string& config_hash) const {
  for (const auto& e : events()) {
    if (e.value("kind", "") != "complete")
      continue;
    const auto& d = e.at("data");
    if (d.value("stage", "") == stage && d.value("config_hash", "") == config_hash)
      return true;
  }
  return false;
}

std::vector<nlohmann::json> Manifest::events() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<nlohmann::json> out;
  std::ifstream in(file());
  if (!in)
    return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

std::string iso_timestamp_utc() {
  using namespace std::chrono;
  auto now = system_clock::now();
  std::time_t tt = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

} // namespace railgen
