#pragma once

#include <string>
#include <vector>

namespace artrec::cli {

/// Entry point shared by the binary and the tests. argv-style arguments
/// without the program name. Exit codes: 0 success, 1 validation error,
/// 2 runtime failure.
int run(const std::vector<std::string>& args);

}  // namespace artrec::cli
