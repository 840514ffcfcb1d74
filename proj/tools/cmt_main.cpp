#include <iostream>

#include "cmt/cli.hpp"

int main(int argc, char** argv) { return cmt::cli::run(argc, argv, std::cout, std::cerr); }
