// SPDX-License-Identifier: Apache-2.0
#include "enlarge/cli.hpp"

int main(int argc, char** argv) { return enlarge::cli::main(argc, argv); }
