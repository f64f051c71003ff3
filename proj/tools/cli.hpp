// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace cwtrnn::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kInternalError = 3;

// Runs the cwtrnn command line. Data goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cwtrnn::cli
