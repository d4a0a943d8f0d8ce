#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sticky {

/// Named failure conditions raised by the solvers, the simulator and the
/// experiment runner. The string form (see to_string) is what appears in
/// machine-readable error records.
enum class ErrorCode {
    CostExceedsIntercept,
    NonpositiveCost,
    NonpositiveWeight,
    NonpositiveParameter,
    NegativeDiffusion,
    NonfiniteParameter,
    EmptyGains,
    InvalidPopulation,
    InvalidInitialConditions,
    ImaginaryAxisRoot,
    DegenerateSpectrum,
    SingularBoundary,
    NoConvergence,
    InvalidConfig,
    UnstableStep,
    RiccatiBlowup,
    ParamsMismatch,
    InternalError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace sticky
