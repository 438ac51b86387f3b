#pragma once

#include <iosfwd>

namespace opmodel::cli {

/// Exit codes: 0 the command completed (whatever the verdict), 1 setup or I/O
/// failure, 2 invalid arguments.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace opmodel::cli
