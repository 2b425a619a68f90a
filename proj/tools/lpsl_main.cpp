#include <iostream>

#include "lpsl/cli.hpp"

int main(int argc, char** argv) { return lpsl::run_cli(argc, argv, std::cout, std::cerr); }
