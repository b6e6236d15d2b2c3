#include <iostream>
#include <string>
#include <vector>

#include "curriculab/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return curriculab::cli::run(args, std::cout, std::cerr);
}
