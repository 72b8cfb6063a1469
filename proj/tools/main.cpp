#include <iostream>

#include "dspgemm/cli.hpp"

int main(int argc, char** argv) {
  return dspgemm::run_cli(argc, argv, std::cout, std::cerr);
}
