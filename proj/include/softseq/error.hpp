#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace softseq {

enum class ErrorKind {
    AlreadyTerminated,
    HorizonExceeded,
    ForbiddenToken,
    InvalidArgument,
    EnumerationBudgetExceeded,
    ZeroProbabilityPrefix,
    UnknownKey,
    NonFiniteLoss,
    NonFiniteGradient,
    EmptyReference,
    EmptyDataset,
    DivergenceDetected,
    ParseError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the ErrorKind tags so
/// callers (and the CLI exit-code mapping) can dispatch without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace softseq
