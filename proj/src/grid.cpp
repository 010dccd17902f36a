// SPDX-License-Identifier: Apache-2.0
#include "mxql/grid.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "mxql/error.hpp"

namespace mxql {
namespace {

template <class T>
T parse_number(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end)
    throw ConfigError("cannot parse number '" + std::string(text) + "'");
  return value;
}

template <class T>
std::vector<T> parse_list(std::string_view text) {
  std::vector<T> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_number<T>(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

}  // namespace

void Grid::validate() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(step))
    throw ConfigError("grid bounds and step must be finite");
  if (!(step > 0.0)) throw ConfigError("grid step must be positive");
  if (hi < lo) throw ConfigError("grid is empty (hi < lo)");
}

std::size_t Grid::size() const {
  validate();
  return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

std::vector<double> Grid::points() const {
  const std::size_t n = size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = at(i);
  return out;
}

Grid parse_grid(std::string_view text) {
  const auto first = text.find(':');
  const auto second = first == std::string_view::npos ? first : text.find(':', first + 1);
  if (second == std::string_view::npos)
    throw ConfigError("grid must be written lo:hi:step, got '" + std::string(text) + "'");
  Grid g{parse_number<double>(text.substr(0, first)),
         parse_number<double>(text.substr(first + 1, second - first - 1)),
         parse_number<double>(text.substr(second + 1))};
  g.validate();
  return g;
}

std::vector<double> parse_double_list(std::string_view text) { return parse_list<double>(text); }
std::vector<int> parse_int_list(std::string_view text) { return parse_list<int>(text); }

}  // namespace mxql
