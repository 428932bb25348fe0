#pragma once

#include <stdexcept>
#include <string>

namespace fdfx {

// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorKind {
  Config,     // bad parameters or options
  Data,       // malformed or inconsistent input data
  Numerical,  // singular systems, indefinite covariances, degenerate fits
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Short machine-readable tag, e.g. "domain", "ragged-grid", "numerical-rank".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::Numerical: return "numerical";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, std::string code, const std::string& what) {
  throw Error(kind, std::move(code), what);
}

}  // namespace fdfx
