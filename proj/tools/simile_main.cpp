#include <iostream>

#include "simile/cli.hpp"

int main(int argc, char** argv) { return simile::run(argc, argv, std::cout, std::cerr); }
