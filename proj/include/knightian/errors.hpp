#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace knightian {

// Malformed payoff text. offset is the byte position where parsing stopped.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : std::runtime_error(message + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Payoff evaluated outside its domain (log/sqrt of a negative, x/0, overflow).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Explicit scheme would be unstable for the requested grid.
class CflError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Iterative solver hit its cap or drifted to the simplex boundary.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Equilibrium requested for an economy whose aggregate endowment varies.
class AggregateUncertaintyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace knightian
