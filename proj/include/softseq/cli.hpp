#pragma once

#include <iosfwd>

namespace softseq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;

/// Entry point of the softseq command line tool. Subcommands: oracle, train,
/// eval, check, sweep.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace softseq
