#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "blade/util.hpp"

namespace blade {

/// Minimal TOML-style document: [table] / [[array-of-table]] headers, bare
/// keys with string / integer / float / boolean / flat-array values, and
/// '#' comments. Errors carry the offending line number.
struct ConfigValue {
  enum class Kind { String, Integer, Float, Boolean, Array };
  Kind kind = Kind::String;
  std::string text;
  long long integer = 0;
  double number = 0.0;
  bool boolean = false;
  std::vector<ConfigValue> array;
  int line = 0;

  std::string as_string() const;
  long long as_int() const;
  double as_double() const;  // accepts integers
  bool as_bool() const;
  const std::vector<ConfigValue>& as_array() const;
};

class ConfigTable {
 public:
  const ConfigValue* find(const std::string& key) const;
  const ConfigTable* table(const std::string& key) const;
  const std::vector<ConfigTable>* table_array(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<long long> get_int_array(const std::string& key) const;  // empty if absent
  std::vector<std::string> get_string_array(const std::string& key) const;

  const ConfigValue& require(const std::string& key) const;

  std::map<std::string, ConfigValue> values;
  std::map<std::string, ConfigTable> tables;
  std::map<std::string, std::vector<ConfigTable>> table_arrays;
  int line = 0;
};

ConfigTable parse_config(const std::string& text);
ConfigTable parse_config_file(const std::filesystem::path& path);

}  // namespace blade
