// SPDX-License-Identifier: Apache-2.0
//
// Plain key=value record written next to every CSV a command produces.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mxql/key_value.hpp"

namespace mxql {

struct RunManifest {
  std::string subcommand;
  KeyValues config;  // resolved settings, emitted as config.<key>
  std::uint64_t seed = 0;
  std::string version;
  std::vector<std::string> outputs;
};

/// Sorted keys, no timestamps: identical runs give identical manifests.
void write_manifest(std::ostream& out, const RunManifest& manifest);

std::string manifest_path(const std::string& csv_path);

}  // namespace mxql
