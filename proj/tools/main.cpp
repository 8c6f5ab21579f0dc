#include <iostream>
#include <string>
#include <vector>

#include "ctnli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ctnli::cli::run(args, std::cout, std::cerr);
}
