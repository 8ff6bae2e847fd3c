#include "fmrigcca/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return fmrigcca::cli::run(argc, argv, std::cout, std::cerr); }
