#pragma once

// Independent readers for the exported map formats. Each returns an empty
// string when the file conforms and a description of the first violation
// otherwise.

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ccqt::testing {

struct PgmImage {
  std::size_t width = 0, height = 0, maxval = 0;
  std::vector<long> pixels;  // row-major, first row first
};

// Plain PGM: "P2", width, height, maxval, then width·height integers in
// [0, maxval]; tokens separated by whitespace, `#` starts a comment that
// runs to the end of the line.
inline std::string check_pgm(const std::string& path, PgmImage* image = nullptr) {
  std::ifstream in(path);
  if (!in) return "cannot open " + path;
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
  }
  if (tokens.size() < 4) return "header incomplete";
  if (tokens[0] != "P2") return "magic is '" + tokens[0] + "', not P2";
  auto number = [](const std::string& s, long& out) {
    if (s.empty()) return false;
    for (char c : s)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    out = std::stol(s);
    return true;
  };
  long w, h, maxval;
  if (!number(tokens[1], w) || !number(tokens[2], h) || !number(tokens[3], maxval))
    return "non-numeric header field";
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) return "header out of range";
  if (tokens.size() != 4 + static_cast<std::size_t>(w * h))
    return "expected " + std::to_string(w * h) + " pixels, found " +
           std::to_string(tokens.size() - 4);
  PgmImage img{static_cast<std::size_t>(w), static_cast<std::size_t>(h),
               static_cast<std::size_t>(maxval), {}};
  for (std::size_t i = 4; i < tokens.size(); ++i) {
    long v;
    if (!number(tokens[i], v) || v > maxval) return "bad pixel '" + tokens[i] + "'";
    img.pixels.push_back(v);
  }
  if (image) *image = std::move(img);
  return "";
}

// Saliency CSV: header `k,t,value`, then rows of two non-negative integers
// and a finite non-negative decimal number; `expected_rows` data rows.
inline std::string check_saliency_csv(const std::string& path, std::size_t expected_rows) {
  std::ifstream in(path);
  if (!in) return "cannot open " + path;
  std::string line;
  if (!std::getline(in, line) || line != "k,t,value") return "bad header";
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 3) return "row " + std::to_string(rows) + ": expected 3 fields";
    for (int i = 0; i < 2; ++i) {
      if (fields[i].empty()) return "row " + std::to_string(rows) + ": empty index";
      for (char c : fields[i])
        if (!std::isdigit(static_cast<unsigned char>(c)))
          return "row " + std::to_string(rows) + ": bad index";
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(fields[2], &used);
    } catch (...) {
      return "row " + std::to_string(rows) + ": bad value";
    }
    if (used != fields[2].size() || !(v >= 0.0) || v == HUGE_VAL)
      return "row " + std::to_string(rows) + ": bad value '" + fields[2] + "'";
  }
  if (rows != expected_rows)
    return "expected " + std::to_string(expected_rows) + " rows, found " + std::to_string(rows);
  return "";
}

namespace detail {

inline std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool decimal(const std::string& s, double& v) {
  std::size_t used = 0;
  try {
    v = std::stod(s, &used);
  } catch (...) {
    return false;
  }
  return used == s.size() && std::isfinite(v);
}

inline bool count_field(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

}  // namespace detail

// Score CSV: header `clip_id,label,score`, then rows of a non-empty id, a
// label 0 or 1 and a score in [0, 1]; `expected_rows` data rows, both labels
// present.
inline std::string check_scores_csv(const std::string& path, std::size_t expected_rows) {
  std::ifstream in(path);
  if (!in) return "cannot open " + path;
  std::string line;
  if (!std::getline(in, line) || line != "clip_id,label,score") return "bad header";
  std::size_t rows = 0;
  bool seen[2] = {false, false};
  while (std::getline(in, line)) {
    ++rows;
    const auto f = detail::fields(line);
    const std::string where = "row " + std::to_string(rows);
    if (f.size() != 3) return where + ": expected 3 fields";
    if (f[0].empty()) return where + ": empty clip id";
    if (f[1] != "0" && f[1] != "1") return where + ": bad label '" + f[1] + "'";
    seen[f[1] == "1"] = true;
    double v = 0.0;
    if (!detail::decimal(f[2], v) || v < 0.0 || v > 1.0) return where + ": bad score";
  }
  if (rows != expected_rows)
    return "expected " + std::to_string(expected_rows) + " rows, found " + std::to_string(rows);
  if (!seen[0] || !seen[1]) return "only one label present";
  return "";
}

// Report CSV: header `mode,eer,threshold,n_bona_fide,n_spoof`, one row per
// entry of `modes` in that order, EER in [0, 1], finite threshold, positive
// counts.
inline std::string check_report_csv(const std::string& path,
                                    const std::vector<std::string>& modes) {
  std::ifstream in(path);
  if (!in) return "cannot open " + path;
  std::string line;
  if (!std::getline(in, line) || line != "mode,eer,threshold,n_bona_fide,n_spoof")
    return "bad header";
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto f = detail::fields(line);
    const std::string where = "row " + std::to_string(rows + 1);
    if (f.size() != 5) return where + ": expected 5 fields";
    if (rows >= modes.size() || f[0] != modes[rows]) return where + ": unexpected mode '" + f[0] + "'";
    double eer = 0.0, threshold = 0.0;
    if (!detail::decimal(f[1], eer) || eer < 0.0 || eer > 1.0) return where + ": bad eer";
    if (!detail::decimal(f[2], threshold)) return where + ": bad threshold";
    if (!detail::count_field(f[3]) || !detail::count_field(f[4]) || f[3] == "0" || f[4] == "0")
      return where + ": bad counts";
    ++rows;
  }
  if (rows != modes.size())
    return "expected " + std::to_string(modes.size()) + " rows, found " + std::to_string(rows);
  return "";
}

}  // namespace ccqt::testing
