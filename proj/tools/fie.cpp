#include "fie/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return fie::cli::run(argc, argv, std::cout, std::cerr); }
