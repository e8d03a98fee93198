#pragma once

#include <iosfwd>

namespace faultline::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the `faultline` binary. Errors go to `err` as one JSON object
/// {"error": {"kind": ..., "message": ...}}; the return value is the exit code.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace faultline::cli
