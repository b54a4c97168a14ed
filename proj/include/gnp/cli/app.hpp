#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gnp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// The gnp_lab command line. `args` excludes the program name. Returns the
/// process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gnp::cli
