#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>

#include "snn/cli/run_config.hpp"

namespace snn::cli {

enum ExitCode : int { exit_ok = 0, exit_internal = 1, exit_usage = 2 };

/// Each command writes into cfg.out and reports progress on `log`. Errors are
/// thrown; run_command() maps them to exit codes.
void cmd_train(RunConfig cfg, std::ostream& log);
void cmd_sweep(RunConfig cfg, std::ostream& log);
void cmd_perturb(RunConfig cfg, std::ostream& log);
void cmd_report(const std::filesystem::path& run_dir, std::ostream& log);

/// Renders accuracy.svg and spikes.svg plus sweep_summary.txt from sweep.csv.
void render_sweep_outputs(const std::filesystem::path& run_dir, std::ostream& log);
/// Renders one SVG per corr/*.bin matrix.
void render_corr_outputs(const std::filesystem::path& run_dir, std::ostream& log);

/// Runs `body`, printing any error to `err`. ConfigError and FormatError are
/// user errors (2); anything else is an internal failure (1).
int run_command(const std::function<void()>& body, std::ostream& err);

}  // namespace snn::cli
