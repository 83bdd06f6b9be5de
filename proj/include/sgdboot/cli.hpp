#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "sgdboot/experiments.hpp"

namespace sgdboot {

enum class OutputFormat { Csv, Json };

struct CliConfig {
  std::string subcommand;
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 42;
  int threads = 0;
  std::string out;  // empty or "-": the output stream passed to dispatch
  std::string summary_path;
  OutputFormat format = OutputFormat::Csv;
  bool log = false;
};

inline constexpr int kExitPass = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitAssertion = 2;

// Writes the table to cfg.out (or `out`), and the summary JSON to cfg.summary_path (or one line on `err`).
void emit(const ExperimentResult& res, const CliConfig& cfg, std::ostream& out, std::ostream& err);

// Exit codes: 0 pass, 2 experiment assertion failure, 1 usage, configuration or I/O error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sgdboot
