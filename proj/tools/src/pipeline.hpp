#pragma once

#include "config.hpp"

#include "jcl/report.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace jcl::app {

inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFail = 2;

struct RunResult {
  std::vector<ExperimentReport> reports;
  int exit_code = kExitPass;
};

// Runs every check in config order and writes reports/, criteria.csv,
// summary.csv, summary.txt, extra tables and plots/ under out_dir. Module
// errors propagate as jcl::Error with the check name prepended.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

// Writes text to path through a temporary file and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& text);

// Fixed-width table: check, anchor, margin (6 digits), verdict.
std::string summary_table(const std::vector<ExperimentReport>& reports);

}  // namespace jcl::app
