#include <iostream>

#include "softseq/cli.hpp"

int main(int argc, char** argv) { return softseq::run_cli(argc, argv, std::cout, std::cerr); }
