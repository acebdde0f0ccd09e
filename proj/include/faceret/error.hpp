#pragma once

#include <stdexcept>
#include <string>

namespace faceret {

enum class ErrorKind {
  InvalidArgument,
  Shape,
  Format,
  Validation,
  Config,
  Weight,
  Domain,
  Parse,
  Usage,
  Internal,
};

const char* to_string(ErrorKind kind);

// Every failure surfaced by the library is an Error carrying a kind, so the
// CLI can map it onto a stable exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// 0 success, 1 usage/config, 2 data/format, 3 internal.
int exit_code_for(ErrorKind kind);

}  // namespace faceret
