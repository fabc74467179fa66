#include <iostream>
#include <string>
#include <vector>

#include "ucdir/cli.hpp"
#include "ucdir/config.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return ucdir::run_cli(args, std::cout, std::cerr, ucdir::process_environment());
}
