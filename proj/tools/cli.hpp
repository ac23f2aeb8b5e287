#ifndef DDLAB_TOOLS_CLI_HPP
#define DDLAB_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace ddlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

/// Runs one ddlab command. `args` excludes the program name. Results go to
/// `out` (or the files named by --out), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ddlab::cli

#endif  // DDLAB_TOOLS_CLI_HPP
