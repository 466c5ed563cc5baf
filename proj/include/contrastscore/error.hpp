#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace contrastscore {

enum class ErrorKind {
    // alignment / domain validation
    InvalidValue,
    LengthMismatch,
    TokenMismatch,
    TokenizerMismatch,
    // scoring
    MissingTopK,
    WrongScorerKind,
    // baselines / stats
    EmptyReference,
    DegenerateVariance,
    NoComparablePairs,
    // ingestion
    MalformedRecord,
    MissingAnnotation,
    UnknownSeverity,
    MissingSystemOutput,
    DuplicateRecord,
    MissingRole,
    Io,
    // provider
    Timeout,
    BackendError,
    TokenizationDrift,
    // bench / cli
    InsufficientWorkload,
    UnknownInstance,
    Config,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. `kind()` is the stable, testable part;
/// the message carries provenance (positions, offsets, file names).
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Configuration problems map to exit code 2, everything else to 1.
    bool is_config_error() const noexcept { return kind_ == ErrorKind::Config; }

  private:
    ErrorKind kind_;
};

} // namespace contrastscore
