#include "ivsel/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ivsel::run_cli(argc, argv, std::cout, std::cerr); }
