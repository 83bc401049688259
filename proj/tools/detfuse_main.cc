#include <iostream>
#include <string>
#include <vector>

#include "detfuse/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return detfuse::run_command(args, std::cout, std::cerr);
}
