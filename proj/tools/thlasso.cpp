#include "thlasso/harness/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return thlasso::harness::run_cli(argc, argv, std::cout, std::cerr);
}
