#include <iostream>
#include <string>
#include <vector>

#include "hrc/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return hrc::cli::runCli(args, std::cout, std::cerr);
}
