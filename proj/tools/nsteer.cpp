// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include <iostream>

#include "nsteer/cli.hpp"

int main(int argc, char** argv) { return nsteer::run_cli(argc, argv, std::cout, std::cerr); }
