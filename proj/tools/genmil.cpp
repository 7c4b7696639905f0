#include <iostream>

#include "genmil/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return genmil::cli_main(args, std::cout, std::cerr);
}
