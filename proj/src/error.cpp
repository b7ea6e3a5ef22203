#include "ltc/error.hpp"

namespace ltc {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedFile: return "MalformedFile";
    case Errc::MissingFile: return "MissingFile";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::MissingLabels: return "MissingLabels";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::StaleCache: return "StaleCache";
    case Errc::InvalidLength: return "InvalidLength";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DegenerateColumn: return "DegenerateColumn";
    case Errc::DomainError: return "DomainError";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::DiskWriteFailure: return "DiskWriteFailure";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::MissingCheckpoint: return "MissingCheckpoint";
  }
  return "Unknown";
}

}  // namespace ltc
