#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "margint/process_sim.hpp"

namespace margint {

// CSV layout: header "t,x_1,...,x_d,y" then one row per time point. Lines
// starting with '#' are comments; writers use one to stamp the config hash.
//
// Binary layout (little-endian): uint64 d, float64 delta, float64 horizon,
// uint64 seed, then rows (t, x_1..x_d, y) as float64, row-major.

void write_path_csv(std::ostream& out, const SamplePath& path, const std::string& config_hash = {});
SamplePath read_path_csv(std::istream& in);

void write_path_binary(std::ostream& out, const SamplePath& path);
SamplePath read_path_binary(std::istream& in);

/// Dispatch on extension: ".bin" selects the binary format, anything else CSV.
void save_path(const std::filesystem::path& file, const SamplePath& path,
               const std::string& config_hash = {});
/// Throws DataError on unreadable or malformed files.
SamplePath load_path(const std::filesystem::path& file);

}  // namespace margint
