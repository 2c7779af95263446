#include <iostream>
#include <string>
#include <vector>

#include "protoeval/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return protoeval::run_cli(args, std::cout, std::cerr);
}
