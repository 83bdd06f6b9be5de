#include "sgdboot/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sgdboot {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void ResultTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) throw std::invalid_argument("row width does not match column count");
  rows.push_back(std::move(row));
}

std::size_t ResultTable::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::invalid_argument("unknown column: " + name);
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> ResultTable::column(const std::string& name) const {
  const auto j = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

void ResultTable::sort_by(const std::vector<std::string>& keys) {
  std::vector<std::size_t> idx;
  for (const auto& k : keys) idx.push_back(column_index(k));
  std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
    for (auto j : idx) {
      if (a[j] < b[j]) return true;
      if (b[j] < a[j]) return false;
    }
    return false;
  });
}

void write_csv(std::ostream& os, const ResultTable& t) {
  for (std::size_t j = 0; j < t.columns.size(); ++j) os << (j ? "," : "") << csv_field(t.columns[j]);
  os << "\r\n";
  for (const auto& r : t.rows) {
    for (std::size_t j = 0; j < r.size(); ++j) os << (j ? "," : "") << csv_field(format_double(r[j]));
    os << "\r\n";
  }
}

std::string to_csv(const ResultTable& t) {
  std::ostringstream os;
  write_csv(os, t);
  return os.str();
}

nlohmann::json to_json(const ResultTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (std::isfinite(r[j]))
        obj[t.columns[j]] = r[j];
      else
        obj[t.columns[j]] = format_double(r[j]);
    }
    rows.push_back(std::move(obj));
  }
  return {{"columns", t.columns},
          {"rows", rows},
          {"metadata",
           {{"config_hash", t.metadata.config_hash},
            {"seed", t.metadata.seed},
            {"runtime_seconds", t.metadata.runtime_seconds},
            {"version", t.metadata.version}}}};
}

}  // namespace sgdboot
