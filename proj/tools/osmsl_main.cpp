#include <iostream>

#include "osmsl/cli.hpp"

int main(int argc, char** argv) {
  return osmsl::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
