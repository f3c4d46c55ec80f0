#pragma once

#include "cursor/common.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace cursor::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kUsage = 2;

struct Globals {
  Seed seed = 0;
  unsigned workers = 1;
  std::string out;
  std::string format = "csv";
};

/// Shared state handed to every subcommand.
struct Context {
  CLI::App* app = nullptr;
  Globals globals;
  /// Failures of individual batch entries; reported in the manifest.
  std::vector<std::string> failures;

  std::filesystem::path out_dir() const;
  /// Writes manifest.toml into `dir`. Re-running with `--config <manifest>`
  /// reproduces the run.
  void write_manifest(const std::filesystem::path& dir) const;
};

using Runner = std::function<void(Context&)>;

/// Each registers one subcommand and returns the action to run when it parsed.
Runner add_generate(CLI::App& app, Context& ctx);
Runner add_score(CLI::App& app, Context& ctx);
Runner add_rank(CLI::App& app, Context& ctx);
Runner add_optimize(CLI::App& app, Context& ctx);
Runner add_ablate(CLI::App& app, Context& ctx);
Runner add_recover(CLI::App& app, Context& ctx);
Runner add_report(CLI::App& app, Context& ctx);

/// Parses argv and runs the selected subcommand; returns the exit code.
int run(int argc, char** argv);

}  // namespace cursor::cli
