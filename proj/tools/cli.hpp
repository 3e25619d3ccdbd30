#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace coevol::cli {

enum ExitCode : int {
    kOk = 0,
    kError = 1,
    kUsage = 2,
    kSampleFailures = 3,
};

/// Entry point shared by the binary and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coevol::cli
