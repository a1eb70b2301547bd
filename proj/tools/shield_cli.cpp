#include <iostream>
#include <string>
#include <vector>

#include "shield/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return shield::run_cli(args, std::cout, std::cerr);
}
