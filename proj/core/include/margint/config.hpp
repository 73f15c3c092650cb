#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "margint/experiments.hpp"

namespace margint {

struct StudyPlan {
  std::vector<double> horizons;
  std::size_t replicas = 0;
};

/// A resolved run configuration. `entries` holds every key with its final
/// text value; the typed fields are derived from it.
struct RunConfig {
  std::map<std::string, std::string> entries;
  Scenario scenario;
  double sim_horizon = 4096.0;
  std::size_t estimate_grid_points = 11;
  std::map<StudyKind, StudyPlan> plans;
  StudyConfig study_defaults;  ///< everything but horizons and replicas
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string output_dir;

  StudyConfig study(StudyKind kind) const;
  /// Every horizon the configuration can ask for, ascending.
  std::vector<double> all_horizons() const;
};

/// Kernel reach (support times bandwidth) above the neighbourhood width
/// delta at horizon T, one message per offending kernel.
std::vector<std::string> kernel_reach_violations(const Scenario& scenario, double T);

/// The shipped default scenario as a config document.
std::string_view default_config_text();

/// Parses "key = value" lines ('#' starts a comment line). Throws ConfigError
/// on syntax errors and duplicate keys.
std::map<std::string, std::string> parse_config_entries(std::string_view text);

/// Merges `overrides` into the defaults, checks every condition and builds
/// the typed configuration. Throws ConfigError listing all violations, each
/// prefixed by its condition label.
RunConfig resolve_config(const std::map<std::string, std::string>& overrides);

/// parse_config_entries followed by resolve_config.
RunConfig validate_config(std::string_view text);

/// Reads and validates a file; a missing or unreadable file is a ConfigError.
RunConfig load_config(const std::filesystem::path& file);

/// Applies MARGINT_SEED and MARGINT_WORKERS from the environment.
RunConfig apply_env_overrides(const RunConfig& config);

/// 64-bit FNV-1a over the canonical "key=value" lines, as 16 hex digits.
/// The worker count and output directory do not affect results and are left out.
std::string config_hash(const RunConfig& config);

/// Canonical text of the resolved configuration (sorted keys).
std::string canonical_text(const RunConfig& config);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace margint
