#include <iostream>

#include "drgrade/cli.hpp"

int main(int argc, char** argv) {
  return drgrade::cli::run(argc, argv, std::cout, std::cerr);
}
