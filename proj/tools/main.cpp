#include <iostream>

#include "posebias/cli.hpp"

int main(int argc, char **argv) {
  std::vector<std::string> args(argv, argv + argc);
  return posebias::cli::run(args, std::cout, std::cerr);
}
