#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace poolattn::cli {

// 0 success, 1 verification failure, 2 usage or format error, 3 resource limit.
enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kResourceLimit = 3 };

// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace poolattn::cli
