#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rtc::cli {

/// Exit codes: 0 success, 1 runtime or config error, 2 usage error.
/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rtc::cli
