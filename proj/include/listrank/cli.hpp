#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace listrank {

/// Full command-line entry point, exposed so tests can drive it in-process.
/// Returns the process exit code: 0 success, 1 bad input or configuration,
/// 2 backend exhaustion.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace listrank
