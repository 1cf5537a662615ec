#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace mpep {

// Shortest decimal string that round-trips the double exactly.
inline std::string format_real(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return ec == std::errc{} ? std::string(buf, ptr) : std::to_string(value);
}

}  // namespace mpep
