// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace faithgate {

// Runs one command line (args[0] is the program name). Results go to `out`,
// diagnostics to `err`. Returns 0 on success, 1 on usage errors and 2 on
// data or statistical errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Applies FAITHGATE_LOG (trace, debug, info, warn, error, off) to a stderr logger.
void configure_logging();

}  // namespace faithgate
