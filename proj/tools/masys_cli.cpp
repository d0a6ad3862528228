#include <iostream>

#include "masys/cli_io.hpp"

int main(int argc, char** argv) { return masys::run_command(argc, argv, std::cout, std::cerr); }
