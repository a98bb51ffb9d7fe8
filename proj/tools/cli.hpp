#pragma once

#include <iosfwd>

namespace ksreg::cli {

// Exit codes: 0 success, 1 verification failure or hard numerical error,
// 2 usage or parse error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `ksreg` command. Report documents go to `out` unless
// --out names a file; messages go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ksreg::cli
