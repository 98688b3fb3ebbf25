#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace swarmlfa::cli {

/// Exit codes shared by every subcommand.
enum Exit : int { Ok = 0, BadInput = 2, BadConfig = 3, Diverged = 4 };

/// Parses argv and runs one subcommand (ingest, run, sweep-k, eval, gen-synth).
/// Errors are reported on err and mapped to an Exit code; nothing throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace swarmlfa::cli
