#pragma once

#include <ostream>

namespace qoeloop::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kInfeasible = 3,
  kInvalidInput = 4,
  kRefused = 5,
};

/// Entry point shared by the executable and the tests. Results go to `out`
/// (or to --out), errors to `err` as a one-line JSON object.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qoeloop::cli
