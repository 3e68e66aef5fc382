#pragma once

#include <iosfwd>

namespace swarch::cli {

enum ExitCode : int {
    ok = 0,
    usage_error = 2,
    data_error = 3,
    numeric_error = 4,
};

/// Entry point of the `swarch` tool. Subcommands: simulate, calibrate, infer-restarts,
/// price, evaluate, implied-vol, emit-plots. Errors are reported on `err` as a single
/// line `error kind=<usage|data|numeric> message="..."`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace swarch::cli
