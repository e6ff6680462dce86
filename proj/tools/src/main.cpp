#include <iostream>
#include <string>
#include <vector>

#include "lmd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lmd::run_cli(args, std::cout, std::cerr);
}
