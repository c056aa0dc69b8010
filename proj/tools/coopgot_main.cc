#include <iostream>
#include <string>
#include <vector>

#include "coopgot/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return coopgot::run_cli(args, std::cout, std::cerr);
}
