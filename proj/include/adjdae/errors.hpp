/*
 * Error reporting for adjdae.
 *
 * Every failure raised by the library is an `adjdae::Error` carrying an
 * `ErrorKind`, so callers can branch on the category without parsing messages.
 */
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adjdae {

enum class ErrorKind {
    SingularMatrix,
    NonFiniteValue,
    DimensionMismatch,
    OutOfDomain,
    NewtonDiverged,
    StepSizeUnderflow,
    ToleranceUnreachable,
    PathMismatch,
    NoAnalyticSolution,
    ZeroReference,
    PartitionMismatch,
    UnknownProblem,
    InvalidParams,
    InvalidGrid,
    Unsupported,
    ConfigError,
    IoError,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorKind kind) noexcept
{
    switch(kind)
    {
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::NewtonDiverged: return "NewtonDiverged";
    case ErrorKind::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorKind::ToleranceUnreachable: return "ToleranceUnreachable";
    case ErrorKind::PathMismatch: return "PathMismatch";
    case ErrorKind::NoAnalyticSolution: return "NoAnalyticSolution";
    case ErrorKind::ZeroReference: return "ZeroReference";
    case ErrorKind::PartitionMismatch: return "PartitionMismatch";
    case ErrorKind::UnknownProblem: return "UnknownProblem";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::InvalidGrid: return "InvalidGrid";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), m_kind(kind)
    {
    }

    [[nodiscard]] ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

} // namespace adjdae
