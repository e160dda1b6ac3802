#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ccqt {

// Flat `section.key = value` store shared by the config file parser and the
// checkpoint manifest. Keys keep insertion order for stable serialization.
class KeyValues {
 public:
  void set(std::string key, std::string value);
  bool contains(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  double get_double(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<std::int64_t> get_int_list(std::string_view key) const;

  // One `key = value` per line, in insertion order.
  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Shortest text that parses back to exactly v.
std::string format_double(double v);
std::string format_int_list(const std::vector<std::int64_t>& v);

// Strict scalar parsers; throw ConfigError with `what` in the message.
double parse_double(std::string_view text, std::string_view what);
std::int64_t parse_int(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);
std::vector<std::int64_t> parse_int_list(std::string_view text,
                                         std::string_view what);

std::string_view trim(std::string_view s);

}  // namespace ccqt
