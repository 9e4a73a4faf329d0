#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

namespace medzim {

/// Six significant digits, "NA" for NaN or a missing value.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string format_number(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string("NA");
}

/// Shortest text that reads back to the same double.
inline std::string format_exact(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace medzim
