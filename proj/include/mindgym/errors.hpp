#pragma once

#include <stdexcept>
#include <string>

namespace mindgym {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// gateway
struct TransportError : Error { using Error::Error; };
struct ProtocolError : Error { using Error::Error; };
struct AuthError : Error { using Error::Error; };

// math / vectors
struct DimensionMismatch : Error { using Error::Error; };
struct ZeroVector : Error { using Error::Error; };

// synthesis
struct GenerationEmpty : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct RelationUnknown : Error { using Error::Error; };
struct ImageUnreadable : Error { using Error::Error; };
struct ExtractionFailed : Error { using Error::Error; };
struct PoolStarvation : Error { using Error::Error; };

// analysis / judge
struct JudgeUnparseable : Error { using Error::Error; };
struct DivisionDegenerate : Error { using Error::Error; };
struct DegenerateDenominator : Error { using Error::Error; };

// configuration / CLI
struct ConfigError : Error { using Error::Error; };

}  // namespace mindgym
