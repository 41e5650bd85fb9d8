#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace egolabel::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kInputError = 2,
    kAllWindowsFailed = 3,
};

/// Runs `egolabel <subcommand> ...`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace egolabel::cli
