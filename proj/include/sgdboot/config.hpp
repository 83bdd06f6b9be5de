#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sgdboot {

// Flat configuration document: one "dotted.key = value" per line, '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

KeyValues parse_config_text(std::string_view text);
KeyValues read_config_file(const std::string& path);
// "key=value"; later assignments win.
void apply_override(KeyValues& kv, const std::string& assignment);
// Canonical "key=value\n" lines in key order.
std::string canonical_text(const KeyValues& kv);
// BLAKE2b-128 of canonical_text, lowercase hex.
std::string hash_key_values(const KeyValues& kv);

double parse_double(const std::string& key, const std::string& s);
long parse_long(const std::string& key, const std::string& s);
std::uint64_t parse_u64(const std::string& key, const std::string& s);
std::vector<double> parse_double_list(const std::string& key, const std::string& s);
std::vector<long> parse_long_list(const std::string& key, const std::string& s);

std::string format_value(double v);
std::string format_value(long v);
std::string format_value(int v);
std::string format_value(std::uint64_t v);
std::string format_value(const std::string& v);
std::string format_value(const std::vector<double>& v);
std::string format_value(const std::vector<long>& v);

// Config structs expose `template <class V> void visit(V& v)` calling v(key, field) for each field.
class KvReader {
 public:
  explicit KvReader(const KeyValues& kv) : kv_(kv) {}

  void operator()(const char* key, double& f);
  void operator()(const char* key, long& f);
  void operator()(const char* key, int& f);
  void operator()(const char* key, std::uint64_t& f);
  void operator()(const char* key, std::string& f);
  void operator()(const char* key, std::vector<double>& f);
  void operator()(const char* key, std::vector<long>& f);

  // Throws ConfigError naming every key that no field consumed.
  void finish() const;

 private:
  const std::string* find(const char* key);
  const KeyValues& kv_;
  std::set<std::string> used_;
};

class KvWriter {
 public:
  template <class T>
  void operator()(const char* key, const T& f) {
    out[key] = format_value(f);
  }
  KeyValues out;
};

template <class Cfg>
Cfg config_from(const KeyValues& kv) {
  Cfg c;
  KvReader r(kv);
  c.visit(r);
  r.finish();
  return c;
}

template <class Cfg>
KeyValues config_to_kv(Cfg c) {
  KvWriter w;
  c.visit(w);
  return w.out;
}

template <class Cfg>
std::string config_hash(const Cfg& c) {
  return hash_key_values(config_to_kv(c));
}

}  // namespace sgdboot
