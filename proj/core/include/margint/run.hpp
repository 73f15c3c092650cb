#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "margint/config.hpp"
#include "margint/experiments.hpp"

namespace margint {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  ///< unexpected internal error
  kExitConfig = 2,
  kExitData = 3,
  kExitStudyFail = 4,
};

struct RunOptions {
  std::optional<std::filesystem::path> config_file;  ///< default scenario when absent
  std::vector<std::string> overrides;                ///< "key=value", applied after the file
  std::optional<std::filesystem::path> output_dir;   ///< replaces output.dir
  bool dry_run = false;
  bool use_env = true;  ///< honour MARGINT_SEED / MARGINT_WORKERS

  // simulate
  std::optional<double> horizon;
  bool binary = false;

  // estimate / components: a path file, or a fresh simulation when absent
  std::optional<std::filesystem::path> path_file;
};

/// Loads the configuration named by the options (file, then overrides, then
/// environment). Throws ConfigError.
RunConfig load_run_config(const RunOptions& options);

/// Prints h_T and every h_{l,T} for each horizon in `horizons`.
void print_bandwidths(std::ostream& out, const RunConfig& config, const std::vector<double>& horizons);

int run_simulate(const RunOptions& options, std::ostream& log);
int run_estimate(const RunOptions& options, std::ostream& log);
int run_components(const RunOptions& options, std::ostream& log);
int run_study_command(StudyKind kind, const RunOptions& options, std::ostream& log);
int run_selftest(const RunOptions& options, std::ostream& log);

/// Dispatches "simulate", "estimate", "components", "selftest" or
/// "study <kind>", mapping errors to exit codes: configuration 2, data 3,
/// failed study bands 4.
int run(const std::vector<std::string>& subcommand, const RunOptions& options, std::ostream& log);

/// JSON document of a study result. Runtime and worker count are left out
/// when `include_runtime` is false, which makes the text a pure function of
/// the configuration.
std::string study_result_json(const StudyResult& result, bool include_runtime = true, int indent = 2);

/// FNV-1a over study_result_json(result, false).
std::string results_hash(const StudyResult& result);

}  // namespace margint
