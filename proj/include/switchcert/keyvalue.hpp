#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace switchcert {

/// Sectioned key/value text:
///
///   # comment
///   [section]
///   key = 1.5
///   key2 = [1, 2, 3]
///   key3 = "text"
///   key4 = true
///
/// Section names may contain dots ("modes.1"). Keys are unique per section.
class KeyValueDocument {
 public:
  static KeyValueDocument parse(const std::string& text);

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;

  /// Raw (unparsed) value text, or nullopt if absent.
  std::optional<std::string> raw(const std::string& section, const std::string& key) const;

  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key) const;
  long long get_int(const std::string& section, const std::string& key, long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  std::vector<double> get_list(const std::string& section, const std::string& key) const;
  std::vector<double> get_list(const std::string& section, const std::string& key,
                               const std::vector<double>& fallback) const;

  std::vector<std::string> sections() const;

 private:
  const std::string& require(const std::string& section, const std::string& key) const;

  std::map<std::string, std::map<std::string, std::string>> data_;
};

}  // namespace switchcert
