#include <iostream>

#include "sclmetric/cli.hpp"

int main(int argc, char** argv) { return sclmetric::cli::run(argc, argv, std::cout, std::cerr); }
