#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nbv {

/// Flat `key = value` configuration.
///
/// One entry per line; `#` starts a comment; blank lines are ignored. Keys
/// are dotted names such as `env.terminal_coverage`. Lists are comma
/// separated. Every parse or conversion error is a ConfigError naming the
/// source and line.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void erase(const std::string& key) {
    entries_.erase(key);
    lines_.erase(key);
  }
  /// File name or label given to parse/load.
  const std::string& source() const { return source_; }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Throws for keys outside `known`, which catches misspelled settings.
  void check_known(const std::set<std::string>& known) const;

  /// Sorted `key = value` lines.
  std::string canonical() const;

 private:
  std::string where(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  std::map<std::string, std::size_t> lines_;
  std::string source_ = "<config>";
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

}  // namespace nbv
