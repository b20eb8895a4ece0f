#include "mreg/io/csv.hpp"

#include "mreg/errors.hpp"

#include <cmath>
#include <cstdio>

namespace mreg::io {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::ostream& out, const std::string& schema, std::vector<std::string> columns)
    : out_(out), n_columns_(columns.size()) {
  out_ << "# schema: " << schema << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << "\n";
}

void CsvWriter::field(const std::string& text) {
  if (column_ == n_columns_) throw Error("CSV row has more fields than columns");
  out_ << (column_ ? "," : "") << text;
  ++column_;
}

CsvWriter& CsvWriter::operator<<(double v) {
  field(format_number(v));
  return *this;
}
CsvWriter& CsvWriter::operator<<(long v) {
  field(std::to_string(v));
  return *this;
}
CsvWriter& CsvWriter::operator<<(bool v) {
  field(v ? "true" : "false");
  return *this;
}
CsvWriter& CsvWriter::operator<<(const std::string& v) {
  field(v);
  return *this;
}

void CsvWriter::end_row() {
  if (column_ != n_columns_) throw Error("CSV row has fewer fields than columns");
  out_ << "\n";
  column_ = 0;
  ++rows_;
}

void Summary::add(const std::string& key, double value) { entries_.emplace_back(key, format_number(value)); }
void Summary::add(const std::string& key, long value) { entries_.emplace_back(key, std::to_string(value)); }
void Summary::add(const std::string& key, bool value) { entries_.emplace_back(key, value ? "true" : "false"); }
void Summary::add(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }

void Summary::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << " = " << v << "\n";
}

}  // namespace mreg::io
