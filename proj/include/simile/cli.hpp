#pragma once

#include <iosfwd>

namespace simile {

inline constexpr const char* kVersion = "1.0.0";

// Runs the multi-command tool. Exit codes: 0 success, 1 usage, 2 data
// error, 3 numerical failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace simile
