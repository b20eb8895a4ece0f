#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace mreg::io {

// First line "# schema: <name>/<version>", then the header, then rows.
// Numbers use 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::string& schema, std::vector<std::string> columns);

  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(long v);
  CsvWriter& operator<<(int v) { return *this << static_cast<long>(v); }
  CsvWriter& operator<<(bool v);
  CsvWriter& operator<<(const std::string& v);
  CsvWriter& operator<<(const char* v) { return *this << std::string(v); }
  void end_row();

  std::size_t rows() const { return rows_; }

 private:
  void field(const std::string& text);

  std::ostream& out_;
  std::size_t n_columns_;
  std::size_t column_ = 0;
  std::size_t rows_ = 0;
};

std::string format_number(double v);

// Flat "key = value" lines.
class Summary {
 public:
  void add(const std::string& key, double value);
  void add(const std::string& key, long value);
  void add(const std::string& key, int value) { add(key, static_cast<long>(value)); }
  void add(const std::string& key, bool value);
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }
  void write(std::ostream& out) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace mreg::io
