#include <iostream>

#include "xferlab/harness/harness.hpp"

int main(int argc, char** argv) { return xferlab::harness::run_cli(argc, argv, std::cout, std::cerr); }
