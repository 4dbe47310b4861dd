#include "softseq/error.hpp"

namespace softseq {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::AlreadyTerminated: return "AlreadyTerminated";
        case ErrorKind::HorizonExceeded: return "HorizonExceeded";
        case ErrorKind::ForbiddenToken: return "ForbiddenToken";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::EnumerationBudgetExceeded: return "EnumerationBudgetExceeded";
        case ErrorKind::ZeroProbabilityPrefix: return "ZeroProbabilityPrefix";
        case ErrorKind::UnknownKey: return "UnknownKey";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorKind::EmptyReference: return "EmptyReference";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
        case ErrorKind::DivergenceDetected: return "DivergenceDetected";
        case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

}  // namespace softseq
