#pragma once

#include "crosscov/config.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crosscov::cli {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    unsigned threads = 1;
};

struct Check {
    std::string name;
    double value;
    double threshold;
    bool passed;
};

struct CommandResult {
    std::string csv;
    config::Json summary;
    std::vector<Check> checks;
    bool failed_cells = false;

    bool ok() const;
};

const std::vector<std::string>& command_names();

/// Runs one subcommand on a parsed config document. ConfigError signals a
/// schema problem; other Errors propagate from the experiment itself.
CommandResult run_command(const std::string& command, const config::Json& doc,
                          const Overrides& overrides);

/// 17 significant digits, '.' decimal point.
std::string format_double(double v);

/// Quotes a CSV field when it holds a comma, quote or newline.
std::string csv_field(const std::string& s);

enum ExitCode : int { kExitOk = 0, kExitFailed = 1, kExitConfig = 2 };

/// Argument-level driver used by the crosscov_lab executable.
int main_entry(int argc, char** argv);

}  // namespace crosscov::cli
