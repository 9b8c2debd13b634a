#include "minitad/runner/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return minitad::runner::run_cli(argc, argv, std::cout, std::cerr); }
