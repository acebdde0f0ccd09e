#include "faceret/error.hpp"

namespace faceret {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Weight: return "weight error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Usage: return "usage error";
    case ErrorKind::Internal: return "internal error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::Config:
    case ErrorKind::Parse:
      return 1;
    case ErrorKind::InvalidArgument:
    case ErrorKind::Shape:
    case ErrorKind::Format:
    case ErrorKind::Validation:
    case ErrorKind::Weight:
    case ErrorKind::Domain:
      return 2;
    case ErrorKind::Internal:
      return 3;
  }
  return 3;
}

}  // namespace faceret
