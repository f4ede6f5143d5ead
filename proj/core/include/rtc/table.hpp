#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rtc {

/// Small row/column table used by every report emitter.
struct TextTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

/// RFC 4180 quoting: fields with commas, quotes or newlines are quoted.
std::string csv_escape(std::string_view field);
void write_csv(std::ostream& out, const TextTable& table);
/// Space-padded columns, numeric-looking cells right-aligned.
void write_aligned(std::ostream& out, const TextTable& table);

/// RFC 4180 reader: quoted fields may hold commas, quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);

/// Fixed-point with the given digits; "nan"/"inf" spelled out.
std::string format_fixed(double value, int digits);
/// Shortest round-trip representation.
std::string format_exact(double value);

}  // namespace rtc
