#pragma once

#include <string>
#include <vector>

namespace kcgn::cli {

/// Runs the kcgn command line. Returns the process exit code: 0 success,
/// 1 input or configuration error, 2 numerical failure.
int run(const std::vector<std::string>& args);

}  // namespace kcgn::cli
