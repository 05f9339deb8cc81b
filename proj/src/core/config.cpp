#include "core/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mc {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return from_string(buf.str());
  } catch (const data_error& e) {
    throw data_error(path + ": " + e.what());
  }
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw data_error("line " + std::to_string(lineno) +
                       ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw data_error("line " + std::to_string(lineno) + ": empty key");
    cfg.set(key, value);
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

void Config::set_double(const std::string& key, double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  kv_[key] = buf;
}

std::string Config::get_str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw data_error("missing config key: " + key);
  return it->second;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

int64_t Config::get_int(const std::string& key) const {
  const std::string raw = get_str(key);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(raw.c_str(), &end, 10);
  if (errno != 0 || end == raw.c_str() || *end != '\0')
    throw data_error("config key '" + key + "' is not an integer: '" + raw + "'");
  return static_cast<int64_t>(v);
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double Config::get_double(const std::string& key) const {
  const std::string raw = get_str(key);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (errno != 0 || end == raw.c_str() || *end != '\0')
    throw data_error("config key '" + key + "' is not a number: '" + raw + "'");
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
  const std::string raw = get_str(key);
  if (raw == "true" || raw == "1") return true;
  if (raw == "false" || raw == "0") return false;
  throw data_error("config key '" + key + "' is not a boolean: '" + raw + "'");
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

uint64_t Config::get_u64(const std::string& key) const {
  const std::string raw = get_str(key);
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
  if (errno != 0 || end == raw.c_str() || *end != '\0' || raw.find('-') != std::string::npos)
    throw data_error("config key '" + key + "' is not an unsigned integer: '" + raw + "'");
  return static_cast<uint64_t>(v);
}

uint64_t Config::get_u64(const std::string& key, uint64_t fallback) const {
  return has(key) ? get_u64(key) : fallback;
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  out.reserve(kv_.size());
  for (const auto& [k, _] : kv_) out.push_back(k);
  return out;
}

std::string Config::to_string() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
  return os.str();
}

void Config::check_section(const std::string& prefix,
                           std::initializer_list<const char*> known) const {
  for (const auto& [key, _] : kv_) {
    if (key.rfind(prefix, 0) != 0) continue;
    bool recognized = false;
    for (const char* k : known)
      if (key.compare(prefix.size(), std::string::npos, k) == 0) {
        recognized = true;
        break;
      }
    if (!recognized)
      throw value_error("unknown config key: " + key +
                        " (keys are case-sensitive; see the " +
                        prefix.substr(0, prefix.size() - 1) +
                        " section of the key reference)");
  }
}

}  // namespace mc
