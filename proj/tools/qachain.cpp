#include <iostream>

#include "qachain/cli.hpp"

int main(int argc, char** argv) { return qachain::cli::run(argc, argv, std::cout, std::cerr); }
