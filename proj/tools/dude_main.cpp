#include <iostream>

#include "dude/experiment.hpp"

int main(int argc, char** argv) {
  return dude::run_cli(argc, argv, std::cout, std::cerr);
}
