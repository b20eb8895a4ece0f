#include "mreg/io/config.hpp"

#include "mreg/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mreg::io {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

namespace {

bool to_double(const std::string& text, double& out) {
  const std::string s = trim(text);
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE;
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
  });
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v;
    if (!to_double(item, v)) throw ConfigError("'" + trim(item) + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::string line;
  std::string section;
  int number = 0;
  auto fail = [&](const std::string& what) {
    std::ostringstream os;
    os << source << ":" << number << ": " << what;
    throw ConfigError(os.str());
  };
  while (std::getline(in, line)) {
    ++number;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s[0] == '[') {
      if (s.back() != ']') fail("unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_name(section)) fail("invalid section name '" + section + "'");
      if (cfg.section_lines_.count(section)) fail("duplicate section [" + section + "]");
      cfg.section_lines_[section] = number;
      cfg.sections_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    if (section.empty()) fail("key outside of any section");
    const std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    const auto hash = value.find(" #");
    if (hash != std::string::npos) value = trim(value.substr(0, hash));
    if (!valid_name(key)) fail("invalid key '" + key + "'");
    auto& sec = cfg.sections_[section];
    if (sec.count(key)) fail("duplicate key '" + key + "' in [" + section + "]");
    sec[key] = Entry{value, number};
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in, path);
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key);
}

std::vector<std::string> Config::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : sections_) out.push_back(name);
  return out;
}

std::vector<std::string> Config::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto it = sections_.find(section);
  if (it != sections_.end())
    for (const auto& [k, _] : it->second) out.push_back(k);
  return out;
}

const Config::Entry& Config::entry(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  if (it == sections_.end()) throw ConfigError(source_ + ": missing section [" + section + "]");
  const auto jt = it->second.find(key);
  if (jt == it->second.end()) {
    std::ostringstream os;
    os << source_ << ":" << section_lines_.at(section) << ": section [" << section << "] lacks key '" << key << "'";
    throw ConfigError(os.str());
  }
  return jt->second;
}

std::string Config::where(const std::string& section, const std::string& key) const {
  std::ostringstream os;
  os << source_ << ":" << entry(section, key).line << ": ";
  return os.str();
}

std::string Config::get(const std::string& section, const std::string& key, const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  double v;
  if (!to_double(get(section, key), v)) throw ConfigError(where(section, key) + "'" + key + "' must be a number");
  return v;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long Config::get_int(const std::string& section, const std::string& key) const {
  const std::string s = trim(get(section, key));
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError(where(section, key) + "'" + key + "' must be an integer");
  return v;
}

long Config::get_int(const std::string& section, const std::string& key, long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(where(section, key) + "'" + key + "' must be true or false");
}

std::vector<double> Config::get_list(const std::string& section, const std::string& key) const {
  try {
    return parse_number_list(get(section, key));
  } catch (const ConfigError& e) {
    throw ConfigError(where(section, key) + e.what());
  }
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  if (!section_lines_.count(section)) section_lines_[section] = 0;
  sections_[section][key] = Entry{value, 0};
}

}  // namespace mreg::io
