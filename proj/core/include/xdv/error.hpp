#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xdv {

enum class ErrorKind {
  InvalidArgument,
  Io,
  MalformedRow,
  UnknownDomain,
  EyesOutsideRoi,
  DegenerateRoi,
  BadMagic,
  VersionMismatch,
  TruncatedRecord,
  DuplicateRecord,
  NonFinite,
  LayerMismatch,
  DimensionMismatch,
  DegenerateVector,
  DegenerateSpectrum,
  SingleClass,
  InsufficientData,
  AllGridPointsFailed,
  Stage,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace xdv
