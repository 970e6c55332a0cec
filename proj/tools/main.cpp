#include <iostream>
#include <string>
#include <vector>

#include "gepower_cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return gepower::cli::run(args, std::cerr);
}
