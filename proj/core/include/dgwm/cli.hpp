#pragma once

#include <string>
#include <vector>

namespace dgwm {

// Full command-line entry point. args excludes the program name. Returns the
// process exit code: 0 success, 1 runtime failure, 2 usage/config error.
int run_command(const std::vector<std::string>& args);
int run_command(int argc, const char* const* argv);

}  // namespace dgwm
