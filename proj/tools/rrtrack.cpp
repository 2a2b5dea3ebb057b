#include <iostream>
#include <string>
#include <vector>

#include "rrtrack/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rrtrack::run_cli(args, std::cout, std::cerr);
}
