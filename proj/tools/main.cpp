#include <iostream>

#include "splitplot/cli.hpp"

int main(int argc, char** argv) { return splitplot::cli::run(argc, argv, std::cout, std::cerr); }
