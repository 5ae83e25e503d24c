#pragma once

#include <charconv>
#include <string>

namespace sdwan::csv {

// Shortest round-trip decimal form, locale independent. Keeping every CSV
// writer on this one path is what makes "same seed -> same bytes" hold.
inline std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace sdwan::csv
