#pragma once

#include <string>
#include <vector>

#include "clipscope/error.hpp"

namespace clipscope::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kConfigError = 2,
  kFormatError = 3,
  kDimensionMismatch = 4,
};

ExitCode exit_code_for(ErrorKind kind) noexcept;

/// Runs one command line (args[0] is the program name). Errors are reported
/// as a single "error\t<kind>\t<message>" line on stderr.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace clipscope::cli
