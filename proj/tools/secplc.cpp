#include "secplc/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return secplc::cli::main(argc, argv, std::cout, std::cerr); }
