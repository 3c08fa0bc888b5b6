#ifndef EVI_SRC_TEXT_HPP_
#define EVI_SRC_TEXT_HPP_

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

namespace evi::text {

// Shortest representation that round-trips; identical on every platform
// with a conforming to_chars, which the output-determinism contract needs.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace evi::text

#endif  // EVI_SRC_TEXT_HPP_
