#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvfbm {

// Every library failure derives from Error so the CLI can map classes to
// exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Covariance matrix could not be factorized.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

// Non-finite state produced by the scheme.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Implicit stage did not reach its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double last_residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Configuration rejected; carries every violation, not only the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept {
    return violations_;
  }

 private:
  std::vector<std::string> violations_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvfbm
