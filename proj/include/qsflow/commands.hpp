#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qsf::commands {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;

struct RunOptions {
  /// "json", "csv" or empty for the command's default.
  std::string format;
  std::optional<std::uint64_t> seed;
  /// Worker threads for trajectory ensembles; 0 uses the hardware count.
  /// Results do not depend on it.
  unsigned threads = 0;
};

struct RunResult {
  int exit_code = kExitPass;
  std::string format;
  /// Report (JSON) or table (CSV). For JSON the manifest is embedded.
  std::string document;
  /// Run manifest: command, version, resolved config, RNG and verdict.
  std::string manifest;
  /// Warnings and error messages meant for stderr.
  std::vector<std::string> diagnostics;
};

const std::vector<std::string>& command_names();

/// Runs one subcommand on a JSON config text. Never throws.
RunResult run(const std::string& command, const std::string& config_text,
              const RunOptions& options);

}  // namespace qsf::commands
