#pragma once

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mreg::io {

// INI-like structured text:
//   # comment            (also ';')
//   [section]            dotted names nest: [form.piece0]
//   key = value          value runs to the end of the line
// Keys are unique per section. Every value remembers its line for errors.
class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config load(const std::string& path);

  const std::string& source() const { return source_; }
  bool has_section(const std::string& section) const { return sections_.count(section) != 0; }
  bool has(const std::string& section, const std::string& key) const;
  std::vector<std::string> sections() const;
  std::vector<std::string> keys(const std::string& section) const;

  const Entry& entry(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const { return entry(section, key).value; }
  std::string get(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_int(const std::string& section, const std::string& key) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& section, const std::string& key) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  // "<source>:<line>: " prefix for messages about a value.
  std::string where(const std::string& section, const std::string& key) const;

 private:
  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::map<std::string, int> section_lines_;
};

std::vector<double> parse_number_list(const std::string& text);
std::string trim(const std::string& s);

}  // namespace mreg::io
