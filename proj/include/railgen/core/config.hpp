#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace railgen {

// Flat `key = value` config with dotted section keys. The canonical text
// (sorted keys) is what gets hashed, so key order in the file does not
// matter.
class KvConfig {
public:
  KvConfig() = default;

  static KvConfig from_file(const std::filesystem::path& path);
  static KvConfig from_text(const std::string& text);

  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, long long value);
  void set_double(const std::string& key, double value);

  bool has(const std::string& key) const;

  std::string get(const std::string& key) const;             // throws if absent
  std::string get_or(const std::string& key, const std::string& def) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long def) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double def) const;
  bool get_bool_or(const std::string& key, bool def) const;

  // overlay: values in `other` win
  void merge(const KvConfig& other);

  std::string canonical_text() const;
  std::string hash() const; // fnv1a64 hex of canonical text

  void save(const std::filesystem::path& path) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

private:
  std::map<std::string, std::string> kv_;
};

} // namespace railgen
