// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "attentrack/cli/cli.hpp"

int main(int argc, char** argv) {
    return attentrack::cli::run(argc, argv, std::cout, std::cerr);
}
