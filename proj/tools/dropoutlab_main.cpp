#include <iostream>
#include <string>
#include <vector>

#include "dropoutlab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dropoutlab::run_cli(args, std::cout, std::cerr);
}
