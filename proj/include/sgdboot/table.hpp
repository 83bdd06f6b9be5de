#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace sgdboot {

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

// RFC-4180 field quoting.
std::string csv_field(const std::string& s);

struct TableMetadata {
  std::string config_hash;
  std::uint64_t seed = 0;
  double runtime_seconds = 0.0;
  std::string version;
};

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  TableMetadata metadata;

  ResultTable() = default;
  explicit ResultTable(std::vector<std::string> cols) : columns(std::move(cols)) {}

  void add_row(std::vector<double> row);
  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  // Lexicographic sort on the given key columns.
  void sort_by(const std::vector<std::string>& keys);
};

void write_csv(std::ostream& os, const ResultTable& t);
std::string to_csv(const ResultTable& t);
nlohmann::json to_json(const ResultTable& t);

}  // namespace sgdboot
