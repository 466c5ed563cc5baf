#include "contrastscore/commands.hpp"

#include <iostream>

int main(int argc, char **argv) { return contrastscore::run_cli(argc, argv, std::cout, std::cerr); }
