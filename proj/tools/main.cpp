#include <iostream>

#include "nonosc/report.hpp"

int main(int argc, char** argv) { return nonosc::cli_main(argc, argv, std::cout, std::cerr); }
