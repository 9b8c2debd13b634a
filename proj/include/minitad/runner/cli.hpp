#pragma once

#include <iosfwd>

namespace minitad::runner {

/// Entry point of the `minitad` tool. Subcommands: train, test, eval,
/// extract-features, synth, grid, report. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace minitad::runner
