#include "cplass/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return cplass::cli_dispatch(argc, argv, std::cout, std::cerr); }
