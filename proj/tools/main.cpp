#include "swarch/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return swarch::cli::run(argc, argv, std::cout, std::cerr); }
