#pragma once

#include <CLI11.hpp>

namespace hierrate::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Registers every subcommand on `app`. The returned callable runs the
/// selected subcommand after parsing and returns its exit code.
std::function<int()> register_commands(CLI::App& app);

}  // namespace hierrate::cli
