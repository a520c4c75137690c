#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gridcast::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `gridcast` invocation. `args` excludes the program name.
int command_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int command_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gridcast::cli
