#pragma once

#include <stdexcept>
#include <string>

namespace thlasso {

// Base of every error raised by the library. Solver non-convergence is not
// an error: it is reported through LassoSolution::converged.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define THLASSO_DEFINE_ERROR(Name)            \
  class Name : public Error {                 \
   public:                                    \
    explicit Name(const std::string& what)    \
        : Error(#Name ": " + what) {}         \
  };

THLASSO_DEFINE_ERROR(DimensionMismatch)
THLASSO_DEFINE_ERROR(InvalidDimension)
THLASSO_DEFINE_ERROR(InvalidSpec)
THLASSO_DEFINE_ERROR(InvalidCorrelation)
THLASSO_DEFINE_ERROR(InvalidConstants)
THLASSO_DEFINE_ERROR(NumericalDomain)
THLASSO_DEFINE_ERROR(EmptyContextSet)
THLASSO_DEFINE_ERROR(LengthMismatch)
THLASSO_DEFINE_ERROR(ConfigError)
THLASSO_DEFINE_ERROR(IoError)

#undef THLASSO_DEFINE_ERROR

}  // namespace thlasso
