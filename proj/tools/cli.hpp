#pragma once

namespace modec::cli {

// Entry point shared by the binary and the test suite.
// Exit codes: 0 success, 1 configuration/validation error, 2 runtime failure.
int run(int argc, const char* const* argv);

}  // namespace modec::cli
