#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace ucdir {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitRuntime = 2,
  kExitCheckFailed = 3,
};

/// Entry point for `ucdir <generate|train|eval|cluster|check> ...`.
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::map<std::string, std::string>& env);

}  // namespace ucdir
