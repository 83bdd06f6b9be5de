#include <iostream>

#include "sgdboot/cli.hpp"

int main(int argc, char** argv) { return sgdboot::dispatch(argc, argv, std::cout, std::cerr); }
