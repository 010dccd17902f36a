// SPDX-License-Identifier: Apache-2.0
//
// Locale-independent CSV reading and writing.  Numbers are written in the
// shortest form that round-trips (std::to_chars), so identical doubles
// always produce identical bytes.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mxql {

std::string format_double(double value);

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);

  CsvWriter& add(std::string_view text);
  CsvWriter& add(double value);
  CsvWriter& add(std::int64_t value);
  CsvWriter& add(std::size_t value);
  CsvWriter& add(int value) { return add(static_cast<std::int64_t>(value)); }
  /// Writes an empty field for a missing value.
  CsvWriter& add(std::optional<double> value);
  /// Terminates the row; throws if the field count differs from the header.
  void end_row();

 private:
  std::ostream& out_;
  std::size_t columns_;
  std::size_t field_ = 0;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws InputError when absent.
  std::size_t column(std::string_view name) const;
};

/// Parses a header row plus records.  Fields may not contain commas.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

std::optional<double> parse_optional_double(std::string_view field);

}  // namespace mxql
