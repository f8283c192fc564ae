#pragma once

// Command orchestration shared by the CLI and tests. Each command reads the
// inputs named in a RunConfig, delegates to its module and writes JSON/CSV
// outputs plus manifest.json into the output directory.

#include <iosfwd>
#include <string>
#include <vector>

#include "transnet/config.hpp"
#include "transnet/errors.hpp"

namespace transnet::commands {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,       // invalid configuration or usage
  kInput = 3,        // missing or malformed input data
  kNumeric = 4,      // domain, size, numeric and fit failures
  kConvergence = 5,  // convergence and calibration failures
};

int exit_code(ErrorKind kind) noexcept;

const std::vector<std::string>& names();

struct OutputFile {
  std::string name;
  std::string sha256;
};

struct RunResult {
  std::vector<OutputFile> files;  // manifest.json excluded
};

/// Runs one command. Throws transnet::Error subclasses on failure.
RunResult run(const std::string& command, const config::RunConfig& cfg, std::ostream& log);

/// Runs a command and maps errors to exit codes, printing them to log.
int run_guarded(const std::string& command, const config::RunConfig& cfg, std::ostream& log);

/// Library version string.
const char* version() noexcept;

}  // namespace transnet::commands
