#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace faceret::cli {

// Everything an experiment run needs. Populated from a JSON file
// (--config) and then from flags, which take precedence.
struct ExperimentConfig {
  std::string model;
  std::string manifest;
  std::string descriptors;
  std::vector<std::string> variants;
  std::vector<std::string> distances;
  std::vector<std::size_t> cutoffs;
  std::string anmrr_window = "cutoff";
  std::string output;
  std::string format = "csv";
  std::size_t threads = 0;  // 0: machine parallelism
  bool pivot = false;
  bool skip_errors = false;
};

// Keys mirror the long flag names with '-' replaced by '_':
// {"model": ..., "variants": [...], "distances": [...], "cutoffs": [...],
//  "anmrr_window": ..., "threads": N, "pivot": bool, "skip_errors": bool, ...}
ExperimentConfig load_config(const std::filesystem::path& path);

// args excludes the program name. Data goes to `out`, progress and errors
// to `err`. Returns the process exit code: 0 success, 1 usage/config,
// 2 data/format, 3 internal.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace faceret::cli
