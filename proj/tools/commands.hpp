#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhntf/data.hpp"
#include "mhntf/factorization.hpp"

namespace mhntf::cli {

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExportConfig {
  std::optional<std::filesystem::path> chain;
  std::optional<std::filesystem::path> vocab;
  /// 1-based; empty means every mode.
  std::vector<std::size_t> modes;
  std::size_t keywords = 10;
  /// 1-based mode holding words; defaults to the last mode.
  std::optional<std::size_t> keyword_mode;
};

struct RunConfig {
  int version = 1;
  std::optional<std::filesystem::path> input_path;
  std::optional<SyntheticSpec> synthetic;
  std::vector<std::string> methods;
  std::vector<std::size_t> ranks;
  std::vector<std::uint64_t> seeds{0};
  /// Random restarts per seed; the chain with the lowest final-layer loss is kept.
  std::size_t starts = 1;
  FitOptions options;
  /// 1-based lead mode for a plain "hntf-i" in fit.
  std::size_t lead_mode = 1;
  std::optional<std::filesystem::path> labels;
  double lambda = 1.0;
  std::filesystem::path output = "out";
  ExportConfig export_;
};

/// Parses a JSON config. Relative paths resolve against base_dir.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Entry point behind the `mhntf` executable. args excludes the program name.
/// Returns 0 on success, 1 when some fits failed, 2 on usage or config errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mhntf::cli
