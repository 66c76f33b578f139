// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FFP8_TOOLS_CLI_HPP
#define FFP8_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace ffp8::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one `ffp8` invocation. `args` excludes the program name. Reports go
/// to `out` (or the --out file), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ffp8::cli

#endif  // FFP8_TOOLS_CLI_HPP
