#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace drgrade {

enum class Errc {
  InvalidArgument,
  EmptyImage,
  IoError,
  ParseError,
  ValidationError,
  DuplicateId,
  UnknownImage,
  OrphanInstance,
  OutOfRange,
  EmptyTable,
  TooFewRows,
  SchemaMismatch,
  NonFiniteLoss,
  SolverDiverged,
  LengthMismatch,
  EmptyInput,
  OutOfRangeLabel,
  UnsupportedFormat,
  ConfigError,
};

std::string_view errc_name(Errc code) noexcept;

/// Library-wide exception. `line()` is set for errors tied to a line of an
/// input file (1-based).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
};

}  // namespace drgrade
