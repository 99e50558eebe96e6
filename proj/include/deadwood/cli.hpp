#pragma once

#include <string>
#include <vector>

namespace deadwood::cli {

// Exit codes: 0 success, 1 validation error, 2 I/O error, 64 usage.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

}  // namespace deadwood::cli
