#include "fedq/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fedq {

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  if (columns_ == 0) throw ShapeError("CSV needs at least one column");
  for (std::size_t i = 0; i < columns_; ++i) {
    if (i > 0) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw ShapeError("CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                     std::to_string(columns_));
  }
  for (std::size_t i = 0; i < columns_; ++i) {
    if (i > 0) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
  ++rows_;
}

void CsvWriter::write_file(const std::string& path) const { write_text_file(path, text_); }

std::string CsvWriter::num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out.flush()) throw Error("failed writing " + path);
}

}  // namespace fedq
