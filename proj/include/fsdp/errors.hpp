#pragma once
#include <stdexcept>
#include <string>

namespace fsdp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EigFail : Error { using Error::Error; };
struct NotPSD : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct StallError : Error { using Error::Error; };
struct NoProbes : Error { using Error::Error; };
struct DegenerateCurvature : Error { using Error::Error; };
struct HypothesisError : Error { using Error::Error; };
struct NotApplicable : Error { using Error::Error; };
struct EmptyTestSet : Error { using Error::Error; };
struct AssumptionViolated : Error { using Error::Error; };
struct InvalidArgument : Error { using Error::Error; };

}  // namespace fsdp
