/*
 * error.hpp
 *
 *  Exception type shared by all modules. The kind drives the CLI exit code.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace habs {

enum class ErrorKind {
  Parse,          ///< malformed document, expression or CSV
  Io,             ///< file could not be read or written
  Invalid,        ///< precondition or argument violation
  Domain,         ///< dynamics evaluation outside its domain
  Infeasible,     ///< no well-posed discretization for the request
  Unsatisfiable,  ///< no plan meets the timed goals
  Integration,    ///< integrator audit exceeded its tolerance
  Inconsistent,   ///< plan does not follow the transition relation
  Validation      ///< closed-loop run left a planned cell
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Invalid: return "invalid";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Unsatisfiable: return "unsatisfiable";
    case ErrorKind::Integration: return "integration";
    case ErrorKind::Inconsistent: return "inconsistent";
    case ErrorKind::Validation: return "validation";
  }
  return "unknown";
}

}  // namespace habs
