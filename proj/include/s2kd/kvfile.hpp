#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Structured key = value text used by the dataset manifest and experiment
// configs: one `key = value` pair per line, `#` starts a comment, blank lines
// ignored, dotted keys for nesting, comma-separated lists. Parse errors carry
// the 1-based line number.

namespace s2kd {

struct KvEntry {
  std::string key;
  std::string value;
  int line = 0;
};

class KvFile {
 public:
  static KvFile parse_text(const std::string& text);        // ConfigError on bad lines
  static KvFile parse_file(const std::string& path);        // InputError if unreadable

  const std::vector<KvEntry>& entries() const { return entries_; }
  bool has(const std::string& key) const;

  // Typed getters throw ConfigError (naming the key and line) on absent keys
  // or unparseable values.
  std::string get_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;  // `true` / `false`
  std::vector<double> get_double_list(const std::string& key) const;

  std::string get_string_or(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
  double get_double_or(const std::string& key, double fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;

  // Writer side: appends preserve order; set() replaces an existing key.
  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, std::int64_t v);
  void set_double(const std::string& key, double v);  // round-trip precision
  void set_bool(const std::string& key, bool v);
  std::string to_text() const;
  void write_file(const std::string& path) const;

  // Keys present in the file but not in `known` (prefix matching is not
  // performed; every key must appear verbatim).
  std::vector<KvEntry> unknown_keys(const std::vector<std::string>& known) const;

 private:
  const KvEntry* find(const std::string& key) const;
  std::vector<KvEntry> entries_;
};

}  // namespace s2kd
