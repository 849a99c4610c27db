#include <iostream>
#include <string>
#include <vector>

#include "nfdrl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return nfdrl::run_cli(args, std::cout, std::cerr);
}
