#pragma once

#include <stdexcept>
#include <string>

namespace rlf {

/// Failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
  config,       ///< invalid input or scenario (exit 2)
  infeasible,   ///< numerical infeasibility: CFL, Lusin budget, escape (exit 3)
  invariant,    ///< an internal invariant was violated (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// A trajectory left the safety ball B_{R_max}.
struct EscapeError : Error {
  explicit EscapeError(const std::string& what) : Error(ErrorKind::infeasible, what) {}
};

struct InfeasibleError : Error {
  explicit InfeasibleError(const std::string& what) : Error(ErrorKind::infeasible, what) {}
};

/// Test-function support is not covered by the data of the field it is paired with.
struct CoverageError : Error {
  explicit CoverageError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// A push-forward density fell below the C^{-1} floor.
struct DensityBoundError : Error {
  explicit DensityBoundError(const std::string& what) : Error(ErrorKind::invariant, what) {}
};

/// Too few points to form a ratio (empty tube, singleton node set, ...).
struct DegenerateError : Error {
  explicit DegenerateError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct InternalError : Error {
  explicit InternalError(const std::string& what) : Error(ErrorKind::invariant, what) {}
};

}  // namespace rlf
