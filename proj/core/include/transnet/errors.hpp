#pragma once

#include <stdexcept>
#include <string>

namespace transnet {

enum class ErrorKind {
  input_domain,  // argument outside its mathematical domain
  size,          // dimension mismatch or too few elements
  numeric,       // NaN, out-of-range probability, solver breakdown
  config,        // invalid configuration
  convergence,   // iteration cap reached
  input,         // malformed or missing input data
  fit,           // regression could not be solved
  calibration,   // calibration failed to bracket or converge
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorKind::input_domain, w) {}
};
struct SizeError : Error {
  explicit SizeError(const std::string& w) : Error(ErrorKind::size, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& w) : Error(ErrorKind::convergence, w) {}
};
struct InputError : Error {
  explicit InputError(const std::string& w) : Error(ErrorKind::input, w) {}
};
struct FitError : Error {
  explicit FitError(const std::string& w) : Error(ErrorKind::fit, w) {}
};
struct CalibrationError : Error {
  explicit CalibrationError(const std::string& w) : Error(ErrorKind::calibration, w) {}
};

}  // namespace transnet
