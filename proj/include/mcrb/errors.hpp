#pragma once

#include <stdexcept>
#include <string>

namespace mcrb {

/// Error categories; the CLI maps each one onto a distinct exit status.
enum class ErrorKind {
  parse,       // malformed configuration or arguments
  domain,      // input outside the admissible domain (rejected input)
  capability,  // requested method or closed form not available for this model
  regularity,  // A1 (unique interior pseudo-true point) or A2 (invertible A) violated
  numeric      // non-convergence, divergence, degenerate data, coverage failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorKind::parse, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& what) : Error(ErrorKind::capability, what) {}
};

class RegularityError : public Error {
 public:
  explicit RegularityError(const std::string& what) : Error(ErrorKind::regularity, what) {}
};

/// Optimum found on (or running off to) the boundary of Θ.
class BoundaryError : public RegularityError {
 public:
  using RegularityError::RegularityError;
};

/// Multi-start runs disagree: the KLD minimizer is not numerically unique.
class NonUniqueError : public RegularityError {
 public:
  using RegularityError::RegularityError;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

}  // namespace mcrb
