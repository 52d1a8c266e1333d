#include <iostream>

#include "polymp/cli.hpp"

int main(int argc, char** argv) { return polymp::cli::run(argc, argv, std::cout, std::cerr); }
