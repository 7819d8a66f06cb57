#pragma once

namespace healthwatch::cli {

enum ExitCode : int {
    kOk = 0,
    kInternalError = 1,
    kUsageError = 2,
    kDataError = 3,
    kNothingToReport = 4,
};

/// Entry point shared by the binary and the tests. Subcommands: aggregate, train, detect,
/// postprocess, synth, eval, report, gradcheck. Log level comes from HEALTHWATCH_LOG_LEVEL.
int run(int argc, const char* const* argv);

} // namespace healthwatch::cli
