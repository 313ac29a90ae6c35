#include <vector>

#include "sanmt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sanmt::run_cli(args);
}
