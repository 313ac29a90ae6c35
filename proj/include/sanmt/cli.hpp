#pragma once

#include <string>
#include <vector>

namespace sanmt {

// Runs one toolkit subcommand. Exit codes: 0 success, 1 usage error,
// 2 data error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace sanmt
