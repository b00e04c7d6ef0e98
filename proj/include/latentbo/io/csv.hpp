#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "latentbo/io/blob.hpp"

namespace latentbo::io {

// Shortest round-trippable decimal representation, stable across runs.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// CSV files start with '#'-prefixed comment lines carrying the resolved
// config, then a header row, then data rows.
class CsvWriter {
 public:
  void comment(const std::string& line) { body_ += "# " + line + "\n"; }
  void header(const std::vector<std::string>& cols) { row_strings(cols); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    row_strings(cells);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) body_ += ',';
      body_ += cells[i];
    }
    body_ += '\n';
  }

  const std::string& str() const { return body_; }
  void save(const std::string& path) const { write_file_atomic(path, body_); }

 private:
  std::string body_;
};

}  // namespace latentbo::io
