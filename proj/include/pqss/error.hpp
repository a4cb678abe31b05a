#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pqss {

/// Error classes surfaced by the library. The CLI maps each class onto an exit code.
enum class ErrorKind {
    InvalidResolution,
    InvalidStrip,
    MeshMismatch,
    BoundaryCondition,
    Domain,
    NonConvergence,
    StripFailure,
    DegenerateEigenfunction,
    UnboundedNonlinearity,
    HypothesisFailure,
    LambdaTooSmall,
    ThresholdUnreachable,
    DomainTooLarge,
    SupersolutionSearchFailure,
    SpectralGap,
    FlatnessViolation,
    NoncomparabilityFailure,
    MonotonicityBreakdown,
    Config,
    Usage,
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InvalidResolution: return "invalid-resolution";
    case ErrorKind::InvalidStrip: return "invalid-strip";
    case ErrorKind::MeshMismatch: return "mesh-mismatch";
    case ErrorKind::BoundaryCondition: return "boundary-condition";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::NonConvergence: return "nonconvergence";
    case ErrorKind::StripFailure: return "strip-failure";
    case ErrorKind::DegenerateEigenfunction: return "degenerate-eigenfunction";
    case ErrorKind::UnboundedNonlinearity: return "unbounded-nonlinearity";
    case ErrorKind::HypothesisFailure: return "hypothesis-failure";
    case ErrorKind::LambdaTooSmall: return "lambda-too-small";
    case ErrorKind::ThresholdUnreachable: return "threshold-unreachable";
    case ErrorKind::DomainTooLarge: return "domain-too-large";
    case ErrorKind::SupersolutionSearchFailure: return "supersolution-search-failure";
    case ErrorKind::SpectralGap: return "spectral-gap";
    case ErrorKind::FlatnessViolation: return "flatness-violation";
    case ErrorKind::NoncomparabilityFailure: return "noncomparability-failure";
    case ErrorKind::MonotonicityBreakdown: return "monotonicity-breakdown";
    case ErrorKind::Config: return "config";
    case ErrorKind::Usage: return "usage";
    }
    return "unknown";
}

/// Exception carrying an error class, the pipeline stage that raised it and
/// the condition that failed.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message, std::string stage = {}, std::string condition = {})
        : std::runtime_error(compose(kind, message, stage, condition))
        , kind_(kind)
        , detail_(std::move(message))
        , stage_(std::move(stage))
        , condition_(std::move(condition))
    {
    }

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }
    const std::string& stage() const noexcept { return stage_; }
    const std::string& condition() const noexcept { return condition_; }

    /// Re-raise with a stage label, keeping the rest of the payload.
    Error with_stage(const std::string& stage) const
    {
        Error copy(kind_, detail_, stage_.empty() ? stage : stage_, condition_);
        copy.payload = payload;
        copy.iteration = iteration;
        return copy;
    }

    /// Last iterate for nonconvergence / breakdown errors (empty otherwise).
    std::vector<double> payload;
    /// Iteration index for monotonicity breakdown (-1 when not applicable).
    int iteration = -1;

private:
    static std::string compose(ErrorKind kind, const std::string& message, const std::string& stage,
                               const std::string& condition)
    {
        std::string out = "[";
        out += to_string(kind);
        out += "]";
        if (!stage.empty()) out += " stage=" + stage;
        if (!condition.empty()) out += " condition=" + condition;
        out += ": " + message;
        return out;
    }

    ErrorKind kind_;
    std::string detail_;
    std::string stage_;
    std::string condition_;
};

} // namespace pqss
