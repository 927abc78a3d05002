#include <iostream>
#include <string>
#include <vector>

#include "csireid/cli.hpp"

int main(int argc, char** argv) {
  return csireid::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
