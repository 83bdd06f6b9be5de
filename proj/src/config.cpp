#include "sgdboot/config.hpp"

#include <sodium.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "sgdboot/table.hpp"

namespace sgdboot {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    auto t = trim(cur);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const auto t = trim(s);
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end || t.empty())
    throw ConfigError("config: cannot parse value '" + s + "' for key " + key);
  return v;
}

}  // namespace

KeyValues parse_config_text(std::string_view text) {
  KeyValues kv;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key " + key);
    kv[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(KeyValues& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const auto key = trim(std::string_view(assignment).substr(0, eq));
  if (key.empty()) throw ConfigError("--set: empty key");
  kv[key] = trim(std::string_view(assignment).substr(eq + 1));
}

std::string canonical_text(const KeyValues& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

std::string hash_key_values(const KeyValues& kv) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  const auto text = canonical_text(kv);
  unsigned char out[16];
  crypto_generichash(out, sizeof out, reinterpret_cast<const unsigned char*>(text.data()), text.size(), nullptr, 0);
  char hex[2 * sizeof out + 1];
  sodium_bin2hex(hex, sizeof hex, out, sizeof out);
  return hex;
}

double parse_double(const std::string& key, const std::string& s) { return parse_number<double>(key, s); }
long parse_long(const std::string& key, const std::string& s) { return parse_number<long>(key, s); }
std::uint64_t parse_u64(const std::string& key, const std::string& s) { return parse_number<std::uint64_t>(key, s); }

std::vector<double> parse_double_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<long> parse_long_list(const std::string& key, const std::string& s) {
  std::vector<long> out;
  for (const auto& item : split_list(s)) out.push_back(parse_long(key, item));
  return out;
}

std::string format_value(double v) { return format_double(v); }
std::string format_value(long v) { return std::to_string(v); }
std::string format_value(int v) { return std::to_string(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(const std::string& v) { return v; }

std::string format_value(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::string format_value(const std::vector<long>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

const std::string* KvReader::find(const char* key) {
  used_.insert(key);
  const auto it = kv_.find(key);
  return it == kv_.end() ? nullptr : &it->second;
}

void KvReader::operator()(const char* key, double& f) {
  if (const auto* s = find(key)) f = parse_double(key, *s);
}
void KvReader::operator()(const char* key, long& f) {
  if (const auto* s = find(key)) f = parse_long(key, *s);
}
void KvReader::operator()(const char* key, int& f) {
  if (const auto* s = find(key)) f = static_cast<int>(parse_long(key, *s));
}
void KvReader::operator()(const char* key, std::uint64_t& f) {
  if (const auto* s = find(key)) f = parse_u64(key, *s);
}
void KvReader::operator()(const char* key, std::string& f) {
  if (const auto* s = find(key)) f = *s;
}
void KvReader::operator()(const char* key, std::vector<double>& f) {
  if (const auto* s = find(key)) f = parse_double_list(key, *s);
}
void KvReader::operator()(const char* key, std::vector<long>& f) {
  if (const auto* s = find(key)) f = parse_long_list(key, *s);
}

void KvReader::finish() const {
  std::string unknown;
  for (const auto& [k, v] : kv_)
    if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  if (!unknown.empty()) throw ConfigError("config: unknown key(s): " + unknown);
}

}  // namespace sgdboot
