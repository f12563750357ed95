#include <iostream>

#include "abfkit/pipeline.hpp"

int main(int argc, char** argv) { return abfkit::run_cli(argc, argv, std::cout, std::cerr); }
