#pragma once

#include <stdexcept>
#include <string>

namespace plrp {

enum class ErrorKind {
  shape,
  parse,
  bounds,
  dtype,
  structure,
  io,
  value,
  propagation,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base of every error the library throws. The kind is what the CLI reports.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

#define PLRP_DEFINE_ERROR(Name, Kind)                                          \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string& message) : Error(ErrorKind::Kind, message) {} \
  };

PLRP_DEFINE_ERROR(ShapeError, shape)
PLRP_DEFINE_ERROR(ParseError, parse)
PLRP_DEFINE_ERROR(BoundsError, bounds)
PLRP_DEFINE_ERROR(DtypeError, dtype)
PLRP_DEFINE_ERROR(StructuralError, structure)
PLRP_DEFINE_ERROR(IoError, io)
PLRP_DEFINE_ERROR(ValueError, value)
PLRP_DEFINE_ERROR(PropagationError, propagation)

#undef PLRP_DEFINE_ERROR

} // namespace plrp
