#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace algpde {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input text (polynomials, scalar expressions). Carries the
// character offset of the offending token.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
  std::size_t position;
};

// Bad problem description: schema violations, inconsistent declarations,
// values outside the supported range.
struct ConfigError : Error {
  using Error::Error;
};

// A numerical procedure failed: no convergence, degenerate geometry,
// unresolved stencil, singular linear system.
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace algpde
