#pragma once

#include <string>
#include <vector>

namespace hatesense::cli {

// Entry point shared by the binary and the tests; args excludes argv[0].
// Returns the process exit code: 0 iff all requested artifacts were written.
int run(const std::vector<std::string>& args);

}  // namespace hatesense::cli
