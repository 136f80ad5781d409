#pragma once

#include <stdexcept>
#include <string>

namespace dtheory {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or inconsistent inputs.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Problem size exceeds what a routine supports (e.g. exact diagonalization).
class SizeLimitError : public Error {
 public:
  using Error::Error;
};

/// G0/G1 - 1 < 0, G1 <= 0, or G0 and G1 degenerate.
class DegenerateSpectrumError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Pulse schedule violates a hardware limit or the coherence budget.
class HardwareLimitError : public Error {
 public:
  using Error::Error;
};

/// Configuration / schema errors raised by the driver.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dtheory
