// SPDX-License-Identifier: Apache-2.0
#include "mxql/manifest.hpp"

#include <ostream>

namespace mxql {

void write_manifest(std::ostream& out, const RunManifest& manifest) {
  KeyValues pairs;
  pairs.reserve(manifest.config.size() + 4);
  pairs.emplace_back("subcommand", manifest.subcommand);
  pairs.emplace_back("seed", std::to_string(manifest.seed));
  pairs.emplace_back("version", manifest.version);
  std::string outputs;
  for (const auto& o : manifest.outputs) outputs += (outputs.empty() ? "" : ",") + o;
  pairs.emplace_back("outputs", outputs);
  for (const auto& [k, v] : manifest.config) pairs.emplace_back("config." + k, v);
  write_key_values(out, std::move(pairs));
}

std::string manifest_path(const std::string& csv_path) { return csv_path + ".manifest"; }

}  // namespace mxql
