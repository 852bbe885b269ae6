#include <iostream>

#include "gammkit/cli.hpp"

int main(int argc, char** argv) { return gammkit::cli::run(argc, argv, std::cout, std::cerr); }
