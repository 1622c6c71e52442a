#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace jointspace::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;  // overrides output.dir and the environment
  unsigned threads = 1;
};

const std::vector<std::string>& subcommands();

// Runs one pipeline subcommand and writes its artifacts plus manifest.json.
// Returns 0 on success, 1 for an invalid config, 2 for a runtime failure;
// diagnostics go to `err`, a short summary to `out`.
int run(const std::string& subcommand, const RunOptions& options, std::ostream& out,
        std::ostream& err);

}  // namespace jointspace::cli
