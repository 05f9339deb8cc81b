#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace mc {

// Flat key-value configuration: one `key = value` per line, `#` comments,
// blank lines ignored. Typed getters parse on access; CLI overrides call
// set() after load, so the last write wins.
class Config {
 public:
  Config() = default;
  static Config load(const std::string& path);        // io_error / data_error
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);  // round-trip exact
  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get_str(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key) const;  // true/false/1/0
  bool get_bool(const std::string& key, bool fallback) const;
  uint64_t get_u64(const std::string& key) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;

  std::vector<std::string> keys() const;  // sorted
  std::string to_string() const;          // parseable by from_string

  // Typo guard for section parsers: every key under `prefix` must have its
  // remainder listed in `known`, else value_error. Other sections are not
  // inspected, so one config can drive several tools.
  void check_section(const std::string& prefix,
                     std::initializer_list<const char*> known) const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace mc
