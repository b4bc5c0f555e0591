// maac/data/csv.h
//
// RFC 4180 style CSV: comma separated, double-quoted fields may hold commas,
// newlines and "" escapes. A UTF-8 BOM on the first line is skipped.

#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace maac::data {

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// Throws std::runtime_error naming the line of an unterminated quote.
std::vector<CsvRow> read_csv(std::istream& in);

std::string csv_escape(const std::string& field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace maac::data
