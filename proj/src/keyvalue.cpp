#include "switchcert/keyvalue.hpp"

#include <charconv>
#include <sstream>

#include "switchcert/errors.hpp"

namespace switchcert {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Strips a trailing '#' comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

double parse_number(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto* begin = t.data();
  const auto* end = t.data() + t.size();
  if (!t.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || t.empty()) {
    throw ConfigError("config: " + where + " is not a number: '" + t + "'");
  }
  return value;
}

std::string where(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

}  // namespace

KeyValueDocument KeyValueDocument::parse(const std::string& text) {
  KeyValueDocument doc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config: line " + std::to_string(lineno) + ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ConfigError("config: line " + std::to_string(lineno) + ": empty section name");
      }
      doc.data_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": key outside of any section");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": empty key");
    }
    auto& sec = doc.data_[section];
    if (sec.count(key)) {
      throw ConfigError("config: duplicate key " + where(section, key));
    }
    sec[key] = value;
  }
  return doc;
}

bool KeyValueDocument::has_section(const std::string& section) const {
  return data_.count(section) > 0;
}

bool KeyValueDocument::has(const std::string& section, const std::string& key) const {
  auto it = data_.find(section);
  return it != data_.end() && it->second.count(key) > 0;
}

std::optional<std::string> KeyValueDocument::raw(const std::string& section,
                                                 const std::string& key) const {
  auto it = data_.find(section);
  if (it == data_.end()) return std::nullopt;
  auto kt = it->second.find(key);
  if (kt == it->second.end()) return std::nullopt;
  return kt->second;
}

const std::string& KeyValueDocument::require(const std::string& section,
                                             const std::string& key) const {
  auto it = data_.find(section);
  if (it == data_.end()) {
    throw ConfigError("config: missing key " + where(section, key) + " (no such section)");
  }
  auto kt = it->second.find(key);
  if (kt == it->second.end()) {
    throw ConfigError("config: missing key " + where(section, key));
  }
  return kt->second;
}

double KeyValueDocument::get_double(const std::string& section, const std::string& key) const {
  return parse_number(require(section, key), where(section, key));
}

double KeyValueDocument::get_double(const std::string& section, const std::string& key,
                                    double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long long KeyValueDocument::get_int(const std::string& section, const std::string& key) const {
  const double v = get_double(section, key);
  const auto i = static_cast<long long>(v);
  if (static_cast<double>(i) != v) {
    throw ConfigError("config: " + where(section, key) + " must be an integer");
  }
  return i;
}

long long KeyValueDocument::get_int(const std::string& section, const std::string& key,
                                    long long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

bool KeyValueDocument::get_bool(const std::string& section, const std::string& key,
                                bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = trim(require(section, key));
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config: " + where(section, key) + " must be true or false");
}

std::string KeyValueDocument::get_string(const std::string& section, const std::string& key) const {
  const std::string v = trim(require(section, key));
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

std::string KeyValueDocument::get_string(const std::string& section, const std::string& key,
                                         const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

std::vector<double> KeyValueDocument::get_list(const std::string& section,
                                               const std::string& key) const {
  std::string v = trim(require(section, key));
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
    v = v.substr(1, v.size() - 2);
  }
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_number(item, where(section, key)));
  }
  return out;
}

std::vector<double> KeyValueDocument::get_list(const std::string& section, const std::string& key,
                                               const std::vector<double>& fallback) const {
  return has(section, key) ? get_list(section, key) : fallback;
}

std::vector<std::string> KeyValueDocument::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : data_) out.push_back(name);
  return out;
}

}  // namespace switchcert
