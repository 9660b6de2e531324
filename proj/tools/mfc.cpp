#include "mfc/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mfc::cli_main(argc, argv, std::cout, std::cerr); }
