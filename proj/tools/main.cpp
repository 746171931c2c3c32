// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "replaylab/cli.hpp"

int main(int argc, char** argv) { return replaylab::cli_main(argc, argv, std::cout, std::cerr); }
