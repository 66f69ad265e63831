#include <iostream>

#include "creditprint/cli.hpp"

int main(int argc, char** argv) { return creditprint::run_cli(argc, argv, std::cout, std::cerr); }
