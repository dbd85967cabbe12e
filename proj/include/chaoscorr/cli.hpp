#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace chaoscorr::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 1,
  exit_validation = 2,
  exit_numeric = 3,
  exit_check_failed = 4,
};

struct CommandOptions {
  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<std::string> cache_dir; // falls back to $CHWF_CACHE_DIR
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool emit_plot_data = false;
};

// command: simulate | compare | rmt-verify | fit-lambda. Errors are reported
// on `err` and mapped to an ExitCode.
int run_command(const std::string& command, const CommandOptions& opts, std::ostream& out,
                std::ostream& err);

int run_cli(int argc, char** argv);

} // namespace chaoscorr::cli
