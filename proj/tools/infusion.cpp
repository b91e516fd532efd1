#include <iostream>

#include "infusion/cli.hpp"

int main(int argc, char** argv) {
    return infusion::cli::run_cli(argc, argv, std::cout, std::cerr);
}
