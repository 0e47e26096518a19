#pragma once

#include <stdexcept>
#include <string>

namespace navgym {

// Raised when an input file fails to parse.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when parsed data violates a documented invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace navgym
