#pragma once

#include <stdexcept>
#include <string>

namespace phasewalk {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// pendulum model
struct NonPositiveApexHeight : Error { using Error::Error; };
struct InconsistentOmega : Error { using Error::Error; };
struct MaxSamplesExceeded : Error { using Error::Error; };

// manifolds
struct DomainError : Error { using Error::Error; };
struct EmptyInterval : Error { using Error::Error; };
struct GridMismatch : Error { using Error::Error; };

// planning
struct TransitionNotFound : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct OutOfBounds : Error { using Error::Error; };
struct LateralSearchFailed : Error { using Error::Error; };

// contact forces
struct DegenerateContacts : Error { using Error::Error; };
struct RankDeficient : Error { using Error::Error; };

// recovery
struct GridTooCoarse : Error { using Error::Error; };
struct OutOfGrid : Error { using Error::Error; };
struct InfeasibleApex : Error { using Error::Error; };

// hybrid execution
struct IllegalEdge : Error { using Error::Error; };
struct WalkFailed : Error { using Error::Error; };

// serialization / configuration
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace phasewalk
