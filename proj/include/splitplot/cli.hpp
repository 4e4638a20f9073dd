#pragma once

#include <iosfwd>

namespace splitplot::cli {

enum ExitCode : int {
  kOk = 0,
  kVerificationFailed = 1,
  kInvalidInput = 2,
  kInfeasible = 3,
};

/// Runs the command line `argv[0] <command> [options]`. Reports go to `out`
/// (or the --out file); diagnostics and the input echo of CSV commands go
/// to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace splitplot::cli
