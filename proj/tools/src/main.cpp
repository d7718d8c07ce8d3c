#include <iostream>
#include <string>
#include <vector>

#include "m2oe2/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return m2oe2::cli::run(args, std::cout, std::cerr);
}
