#pragma once

#include <iosfwd>

namespace jointspace::cli {

// Parses arguments and dispatches to a subcommand. Returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace jointspace::cli
