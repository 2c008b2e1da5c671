// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return asreval::cli::run(argc, argv, std::cout, std::cerr); }
