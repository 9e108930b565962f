#include "drgrade/error.hpp"

namespace drgrade {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EmptyImage: return "EmptyImage";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnknownImage: return "UnknownImage";
    case Errc::OrphanInstance: return "OrphanInstance";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::EmptyTable: return "EmptyTable";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::SolverDiverged: return "SolverDiverged";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::OutOfRangeLabel: return "OutOfRangeLabel";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

std::string decorate(Errc code, const std::string& message,
                     std::optional<std::size_t> line) {
  std::string out(errc_name(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(Errc code, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(decorate(code, message, line)),
      code_(code),
      line_(line) {}

}  // namespace drgrade
