#include <iostream>
#include <string>
#include <vector>

#include "rnmt/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rnmt::run_cli(args, std::cout, std::cerr);
}
