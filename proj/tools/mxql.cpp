// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "mxql/cli.hpp"

int main(int argc, char** argv) { return mxql::cli::run(argc, argv, std::cout, std::cerr); }
