#pragma once

#include <string>

namespace rgw {

/// Shortest decimal string that parses back to exactly `x`.
std::string shortest_repr(double x);
/// printf("%.17g") rendering; always round-trips.
std::string repr17(double x);

}  // namespace rgw
