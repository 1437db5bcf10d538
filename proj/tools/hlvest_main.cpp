#include <iostream>
#include <string>
#include <vector>

#include "hlv/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return hlv::cli::run(args, std::cout, std::cerr);
}
