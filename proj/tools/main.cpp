#include <iostream>

#include "cadc/cli.hpp"

int main(int argc, char** argv) { return cadc::run_cli(argc, argv, std::cout, std::cerr); }
