#include <iostream>
#include <string>
#include <vector>

#include "sgm/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return sgm::run_cli(args, std::cout, std::cerr);
}
