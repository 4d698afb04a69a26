#include "railgen/core/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "railgen/core/error.hpp"
#include "railgen/core/hash.hpp"

namespace railgen {

namespace {
std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos)
    return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
} // namespace

KvConfig KvConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    fail("ConfigError", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

KvConfig KvConfig::from_text(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#')
      continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      fail("ConfigError",
           "line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      fail("ConfigError", "line " + std::to_string(lineno) + ": empty key");
    cfg.kv_[key] = value;
  }
  return cfg;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

void KvConfig::set_int(const std::string& key, long long value) {
  kv_[key] = std::to_string(value);
}

void KvConfig::set_double(const std::string& key, double value) {
  std::ostringstream ss;
  ss.precision(17);
  ss << value;
  kv_[key] = ss.str();
}

bool KvConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string KvConfig::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end())
    fail("ConfigError", "missing config key '" + key + "'");
  return it->second;
}

std::string KvConfig::get_or(const std::string& key,
                             const std::string& def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

long long KvConfig::get_int(const std::string& key) const {
  const std::string v = get(key);
  char* end = nullptr;
  long long r = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    fail("ConfigError", "key '" + key + "' is not an integer: " + v);
  return r;
}

long long KvConfig::get_int_or(const std::string& key, long long def) const {
  return has(key) ? get_int(key) : def;
}

double KvConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  char* end = nullptr;
  double r = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    fail("ConfigError", "key '" + key + "' is not a number: " + v);
  return r;
}

double KvConfig::get_double_or(const std::string& key, double def) const {
  return has(key) ? get_double(key) : def;
}

bool KvConfig::get_bool_or(const std::string& key, bool def) const {
  if (!has(key))
    return def;
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on")
    return true;
  if (v == "false" || v == "0" || v == "no" || v == "off")
    return false;
  fail("ConfigError", "key '" + key + "' is not a boolean: " + v);
}

void KvConfig::merge(const KvConfig& other) {
  for (const auto& [k, v] : other.kv_)
    kv_[k] = v;
}

std::string KvConfig::canonical_text() const {
  std::ostringstream ss;
  for (const auto& [k, v] : kv_) // std::map iterates in key order
    ss << k << " = " << v << "\n";
  return ss.str();
}

std::string KvConfig::hash() const { return to_hex(fnv1a64(canonical_text())); }

void KvConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out)
    fail("ConfigError", "cannot write config file " + path.string());
  out << canonical_text();
}

} // namespace railgen
