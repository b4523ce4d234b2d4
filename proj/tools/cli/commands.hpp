#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qsadn/error.hpp"

namespace qsadn::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitEmpty = 4,
  kExitDimension = 5,
};

int exit_code_for(ErrorCode code);

/// Runs one `qsadn` invocation. `args` excludes the program name. Data goes to
/// `out`, diagnostics to `err`; the return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qsadn::cli
