#include "ccqt/kv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ccqt/errors.hpp"

namespace ccqt {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

void KeyValues::set(std::string key, std::string value) {
  if (auto it = index_.find(key); it != index_.end()) {
    entries_[it->second].second = std::move(value);
    return;
  }
  index_.emplace(key, entries_.size());
  entries_.emplace_back(std::move(key), std::move(value));
}

bool KeyValues::contains(std::string_view key) const {
  return index_.find(key) != index_.end();
}

const std::string& KeyValues::get(std::string_view key) const {
  auto it = index_.find(key);
  if (it == index_.end())
    throw ConfigError("missing key '" + std::string(key) + "'");
  return entries_[it->second].second;
}

double KeyValues::get_double(std::string_view key) const {
  return parse_double(get(key), key);
}
std::int64_t KeyValues::get_int(std::string_view key) const {
  return parse_int(get(key), key);
}
bool KeyValues::get_bool(std::string_view key) const {
  return parse_bool(get(key), key);
}
std::vector<std::int64_t> KeyValues::get_int_list(std::string_view key) const {
  return parse_int_list(get(key), key);
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_int_list(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

double parse_double(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() ||
      !std::isfinite(v))
    throw ConfigError("expected a real number for '" + std::string(what) +
                      "', got '" + std::string(t) + "'");
  return v;
}

std::int64_t parse_int(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("expected an integer for '" + std::string(what) +
                      "', got '" + std::string(t) + "'");
  return v;
}

bool parse_bool(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("expected a boolean for '" + std::string(what) +
                    "', got '" + std::string(t) + "'");
}

std::vector<std::int64_t> parse_int_list(std::string_view text,
                                         std::string_view what) {
  std::vector<std::int64_t> out;
  const auto t = trim(text);
  if (t.empty()) return out;
  std::size_t pos = 0;
  while (pos <= t.size()) {
    auto next = t.find(',', pos);
    if (next == std::string_view::npos) next = t.size();
    out.push_back(parse_int(t.substr(pos, next - pos), what));
    pos = next + 1;
  }
  return out;
}

}  // namespace ccqt
