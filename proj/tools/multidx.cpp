#include <iostream>

#include "multidx/cli.hpp"

int main(int argc, char** argv) { return multidx::cli::run(argc, argv, std::cout, std::cerr); }
