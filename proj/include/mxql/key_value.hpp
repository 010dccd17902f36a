// SPDX-License-Identifier: Apache-2.0
//
// Plain "key = value" text, one pair per line, '#' starts a comment.
#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mxql {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Pairs in file order.  Throws ConfigError on a line without '=' or with
/// an empty key, and on a repeated key.
KeyValues parse_key_values(std::istream& in);
KeyValues read_key_value_file(const std::string& path);

/// Sorted by key, "key=value\n" per pair.
void write_key_values(std::ostream& out, KeyValues pairs);

}  // namespace mxql
