#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ltc {

enum class Errc {
  MalformedFile,
  MissingFile,
  ZeroVariance,
  MissingLabels,
  InvalidArgument,
  ShapeMismatch,
  NonFiniteValue,
  StaleCache,
  InvalidLength,
  TooFewSamples,
  DimensionMismatch,
  DegenerateColumn,
  DomainError,
  NonFiniteLoss,
  EmptyPool,
  DiskWriteFailure,
  LengthMismatch,
  MissingCheckpoint,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace ltc
