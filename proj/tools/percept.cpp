// Copyright 2026 The percept Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "percept/cli.hpp"

int main(int argc, char** argv) {
  return percept::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
