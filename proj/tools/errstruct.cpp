#include <iostream>
#include <string>
#include <vector>

#include "errstruct/cli.hpp"

int main(int argc, char** argv) {
  return errstruct::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
