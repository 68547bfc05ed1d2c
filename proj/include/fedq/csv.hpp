#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedq/errors.hpp"

namespace fedq {

/// Minimal CSV builder: fixed column set, one string per cell,
/// newline-terminated rows, no quoting (cells never contain commas).
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  /// Append one row; throws ShapeError when the cell count differs
  /// from the header.
  void row(const std::vector<std::string>& cells);

  const std::string& str() const noexcept { return text_; }
  std::size_t rows() const noexcept { return rows_; }

  /// Write to a file, creating parent directories as needed.
  void write_file(const std::string& path) const;

  /// Render a double with enough digits to round-trip exactly.
  static std::string num(double v);
  static std::string num(int v) { return std::to_string(v); }
  static std::string num(std::uint32_t v) { return std::to_string(v); }
  static std::string num(std::uint64_t v) { return std::to_string(v); }

 private:
  std::size_t columns_ = 0;
  std::size_t rows_ = 0;
  std::string text_;
};

/// Write arbitrary text to a file, creating parent directories.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace fedq
