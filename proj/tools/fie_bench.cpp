#include <iostream>

#include "fie/bench.hpp"

int main(int argc, char** argv) { return fie::bench::cli_main(argc, argv, std::cout, std::cerr); }
