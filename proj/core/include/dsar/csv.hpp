#pragma once

#include <string>
#include <vector>

namespace dsar {

// Minimal numeric CSV utilities. Cells are plain decimal numbers (no quoting
// or thousands separators); LF and CRLF line endings both accepted. Doubles
// are written with enough digits to round-trip bit-exactly.

struct CsvTable {
  std::vector<std::string> header;              // empty if the file had none
  std::vector<std::vector<std::string>> rows;   // raw cells
};

CsvTable read_csv(const std::string& path, bool has_header);

// Parses a cell as double; throws DataError naming the file line on failure.
double parse_double_cell(const std::string& cell, const std::string& path, std::size_t line);
long long parse_int_cell(const std::string& cell, const std::string& path, std::size_t line);

std::string format_double(double v);  // %.17g

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void write_row(const std::vector<std::string>& cells);
  void write_comment(const std::string& text);  // "# ..." line

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace dsar
