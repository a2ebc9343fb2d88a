#pragma once

#include <iosfwd>

namespace psr::cli {

/// Entry point shared by the psrecon binary and the tests. Results go to
/// `out`, diagnostics to `err`. Returns the process exit code: 0 success,
/// 2 configuration or input error, 3 compute failure.
int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);

}  // namespace psr::cli
