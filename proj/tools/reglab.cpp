#include <iostream>
#include <string>
#include <vector>

#include "reglab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return reglab::run_cli(args, std::cout, std::cerr);
}
