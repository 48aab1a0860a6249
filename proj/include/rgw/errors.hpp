#pragma once

#include <stdexcept>
#include <string>

namespace rgw {

// Malformed input: bad files, bad arguments, violated preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine failed to produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rgw
