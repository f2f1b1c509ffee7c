#include "robustloc/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return robustloc::cli::run(argc, argv, std::cout, std::cerr);
}
