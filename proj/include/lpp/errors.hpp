#pragma once

#include <stdexcept>
#include <string>

namespace lpp {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition. Raised before any computation.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A mathematical domain boundary was hit (e.g. a Bessel zero in a ratio).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The coincidence-loss model has no preimage for the requested count.
class SaturationError : public Error {
public:
    using Error::Error;
};

/// An estimator could not find the feature it looks for.
class EstimationError : public Error {
public:
    using Error::Error;
};

/// A fit finished but its result violates the result invariants.
class FitError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

namespace detail {
inline void require(bool condition, const std::string& message)
{
    if (!condition)
        throw ValidationError(message);
}
}  // namespace detail

}  // namespace lpp
