#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wdro {

/// Floating-point CSV field with 9 significant digits ("%.9g"); nan/inf spelled out.
std::string csv_number(double value);
std::string csv_number(std::int64_t value);
std::string csv_number(std::uint64_t value);

/// A CSV table built in memory and written atomically (temp file + rename).
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

  void add_row(std::vector<std::string> fields);
  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace wdro
