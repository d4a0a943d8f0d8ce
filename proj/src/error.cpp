#include "sticky/error.hpp"

namespace sticky {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::CostExceedsIntercept: return "COST_EXCEEDS_INTERCEPT";
        case ErrorCode::NonpositiveCost: return "NONPOSITIVE_COST";
        case ErrorCode::NonpositiveWeight: return "NONPOSITIVE_WEIGHT";
        case ErrorCode::NonpositiveParameter: return "NONPOSITIVE_PARAMETER";
        case ErrorCode::NegativeDiffusion: return "NEGATIVE_DIFFUSION";
        case ErrorCode::NonfiniteParameter: return "NONFINITE_PARAMETER";
        case ErrorCode::EmptyGains: return "EMPTY_GAINS";
        case ErrorCode::InvalidPopulation: return "INVALID_POPULATION";
        case ErrorCode::InvalidInitialConditions: return "INVALID_INITIAL_CONDITIONS";
        case ErrorCode::ImaginaryAxisRoot: return "IMAGINARY_AXIS_ROOT";
        case ErrorCode::DegenerateSpectrum: return "DEGENERATE_SPECTRUM";
        case ErrorCode::SingularBoundary: return "SINGULAR_BOUNDARY";
        case ErrorCode::NoConvergence: return "NO_CONVERGENCE";
        case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
        case ErrorCode::UnstableStep: return "UNSTABLE_STEP";
        case ErrorCode::RiccatiBlowup: return "RICCATI_BLOWUP";
        case ErrorCode::ParamsMismatch: return "PARAMS_MISMATCH";
        case ErrorCode::InternalError: return "INTERNAL_ERROR";
    }
    return "UNKNOWN";
}

}  // namespace sticky
