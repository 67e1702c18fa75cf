#include "s2kd/kvfile.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "s2kd/common.hpp"

namespace s2kd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const KvEntry& e, const char* want) {
  throw ConfigError("line " + std::to_string(e.line) + ": key '" + e.key + "': expected " +
                    want + ", got '" + e.value + "'");
}

double parse_double(const KvEntry& e, const std::string& text) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) bad_value(e, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(e, "a number");
  }
}

}  // namespace

KvFile KvFile::parse_text(const std::string& text) {
  KvFile kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                        stripped + "'");
    KvEntry e;
    e.key = trim(stripped.substr(0, eq));
    e.value = trim(stripped.substr(eq + 1));
    e.line = line_no;
    if (e.key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (kv.find(e.key) != nullptr)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + e.key + "'");
    kv.entries_.push_back(std::move(e));
  }
  return kv;
}

KvFile KvFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open for reading: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

const KvEntry* KvFile::find(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.key == key) return &e;
  return nullptr;
}

bool KvFile::has(const std::string& key) const { return find(key) != nullptr; }

std::string KvFile::get_string(const std::string& key) const {
  const KvEntry* e = find(key);
  if (!e) throw ConfigError("missing required key '" + key + "'");
  return e->value;
}

std::int64_t KvFile::get_int(const std::string& key) const {
  const KvEntry* e = find(key);
  if (!e) throw ConfigError("missing required key '" + key + "'");
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
  if (ec != std::errc() || p != e->value.data() + e->value.size())
    bad_value(*e, "an integer");
  return v;
}

double KvFile::get_double(const std::string& key) const {
  const KvEntry* e = find(key);
  if (!e) throw ConfigError("missing required key '" + key + "'");
  return parse_double(*e, e->value);
}

bool KvFile::get_bool(const std::string& key) const {
  const KvEntry* e = find(key);
  if (!e) throw ConfigError("missing required key '" + key + "'");
  if (e->value == "true") return true;
  if (e->value == "false") return false;
  bad_value(*e, "'true' or 'false'");
}

std::vector<double> KvFile::get_double_list(const std::string& key) const {
  const KvEntry* e = find(key);
  if (!e) throw ConfigError("missing required key '" + key + "'");
  std::vector<double> out;
  std::string item;
  std::istringstream in(e->value);
  while (std::getline(in, item, ',')) out.push_back(parse_double(*e, item));
  return out;
}

std::string KvFile::get_string_or(const std::string& key, const std::string& fallback) const {
  const KvEntry* e = find(key);
  return e ? e->value : fallback;
}

std::int64_t KvFile::get_int_or(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double KvFile::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool KvFile::get_bool_or(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

void KvFile::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_)
    if (e.key == key) {
      e.value = value;
      return;
    }
  entries_.push_back({key, value, 0});
}

void KvFile::set_int(const std::string& key, std::int64_t v) { set(key, std::to_string(v)); }

void KvFile::set_double(const std::string& key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  set(key, buf);
}

void KvFile::set_bool(const std::string& key, bool v) { set(key, v ? "true" : "false"); }

std::string KvFile::to_text() const {
  std::string out;
  for (const auto& e : entries_) {
    out += e.key;
    out += " = ";
    out += e.value;
    out += '\n';
  }
  return out;
}

void KvFile::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open for writing: " + path);
  out << to_text();
  if (!out) throw InputError("write failed: " + path);
}

std::vector<KvEntry> KvFile::unknown_keys(const std::vector<std::string>& known) const {
  std::vector<KvEntry> out;
  for (const auto& e : entries_)
    if (std::find(known.begin(), known.end(), e.key) == known.end()) out.push_back(e);
  return out;
}

}  // namespace s2kd
