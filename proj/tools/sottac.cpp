#include <iostream>

#include "sottac/cli.hpp"

int main(int argc, char** argv) { return sottac::cli::run_cli(argc, argv, std::cout, std::cerr); }
