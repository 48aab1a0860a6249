#include "rgw/format.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace rgw {

std::string shortest_repr(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

std::string repr17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  int len = std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return std::string(buf.data(), static_cast<std::size_t>(len));
}

}  // namespace rgw
