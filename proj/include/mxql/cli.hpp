// SPDX-License-Identifier: Apache-2.0
//
// The mxql command line: loss-curve, err-dist, regress, mdp-train, compare.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mxql::cli {

/// Exit codes: 0 success, 1 configuration or I/O error, other nonzero
/// values for usage errors reported by the argument parser.
inline constexpr int kExitError = 1;

/// argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mxql::cli
