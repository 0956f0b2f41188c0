#include <iostream>

#include "smalleig/cli.hpp"

int main(int argc, char** argv) {
  return smalleig::run_cli(argc, argv, std::cout, std::cerr);
}
