#pragma once

#include <stdexcept>
#include <string>

namespace gridoed {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- case parsing / validation ---
struct MalformedBlock : Error { using Error::Error; };
struct InconsistentTopology : Error { using Error::Error; };
struct UnsupportedFeature : Error { using Error::Error; };
struct MissingField : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };

// --- grid model / power flow ---
struct UnknownLine : Error { using Error::Error; };
struct SingularJacobian : Error { using Error::Error; };
struct NonConvergence : Error { using Error::Error; };
struct PFFailure : Error { using Error::Error; };

// --- optimization ---
struct EvaluationFailure : Error { using Error::Error; };
struct NLPFailure : Error { using Error::Error; };
struct Infeasible : Error { using Error::Error; };

// --- estimation / experiment design ---
struct DimensionMismatch : Error { using Error::Error; };
struct NotPositiveDefinite : Error { using Error::Error; };
struct AllSolvesFailed : Error { using Error::Error; };
struct InsufficientSamples : Error { using Error::Error; };
struct DegenerateFit : Error { using Error::Error; };
struct HorizonExhausted : Error { using Error::Error; };
struct ZeroTruthEntry : Error { using Error::Error; };

}  // namespace gridoed
