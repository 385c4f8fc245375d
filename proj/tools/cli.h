#ifndef NMFLOC_TOOLS_CLI_H_
#define NMFLOC_TOOLS_CLI_H_

#include <iosfwd>

namespace nmfloc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Parses argv, runs one subcommand, and maps failures onto exit codes:
// 1 for usage errors, 2 for I/O and degenerate-input failures.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nmfloc

#endif  // NMFLOC_TOOLS_CLI_H_
