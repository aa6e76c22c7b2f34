#include <iostream>

#include "ptvm/cli.hpp"

int main(int argc, char** argv) {
  return ptvm::cli::dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
