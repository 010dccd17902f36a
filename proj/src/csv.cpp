// SPDX-License-Identifier: Apache-2.0
#include "mxql/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "mxql/error.hpp"

namespace mxql {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("format_double: to_chars failed");
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> header)
    : out_(out), columns_(header.size()) {
  for (const auto& h : header) add(h);
  end_row();
}

CsvWriter& CsvWriter::add(std::string_view text) {
  if (field_ > 0) out_ << ',';
  out_ << text;
  ++field_;
  return *this;
}

CsvWriter& CsvWriter::add(double value) { return add(std::string_view(format_double(value))); }

CsvWriter& CsvWriter::add(std::int64_t value) { return add(std::string_view(std::to_string(value))); }

CsvWriter& CsvWriter::add(std::size_t value) { return add(std::string_view(std::to_string(value))); }

CsvWriter& CsvWriter::add(std::optional<double> value) {
  return value ? add(*value) : add(std::string_view());
}

void CsvWriter::end_row() {
  if (field_ != columns_)
    throw Error("CSV row has " + std::to_string(field_) + " fields, header has " +
                std::to_string(columns_));
  out_ << '\n';
  field_ = 0;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw InputError("CSV has no column '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = line.find(',');
    out.emplace_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw InputError("CSV row with " + std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(table.header.size()));
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw InputError("CSV input is empty");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_csv(in);
}

std::optional<double> parse_optional_double(std::string_view field) {
  if (field.empty()) return std::nullopt;
  if (field == "nan") return std::nan("");
  if (field == "inf") return HUGE_VAL;
  if (field == "-inf") return -HUGE_VAL;
  double v{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw InputError("not a number: '" + std::string(field) + "'");
  return v;
}

}  // namespace mxql
