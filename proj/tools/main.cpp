// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "faithgate/cli.hpp"

int main(int argc, char** argv)
{
    faithgate::configure_logging();
    std::vector<std::string> args(argv, argv + argc);
    return faithgate::run_cli(args, std::cout, std::cerr);
}
