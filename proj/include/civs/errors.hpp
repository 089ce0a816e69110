#pragma once

#include <stdexcept>
#include <string>

namespace civs {

// Base class for everything thrown by this library. Catching civs::Error at
// an API boundary is sufficient to intercept any library failure.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/size mismatches between tensors, kernels, dictionaries, ...
struct DimensionError : Error {
    using Error::Error;
};

// A parameter value outside its documented domain (negative threshold,
// zero-width kernel, non-orthonormal basis, ...).
struct InvalidArgument : Error {
    using Error::Error;
};

// File-level problems. The message always contains the offending path.
struct IoError : Error {
    using Error::Error;
};
struct BadMagicError : IoError {
    using IoError::IoError;
};
struct TruncatedError : IoError {
    using IoError::IoError;
};
struct NonFiniteError : IoError {
    using IoError::IoError;
};

// Runtime numerical failures (as opposed to malformed inputs).
struct NumericError : Error {
    using Error::Error;
};
struct SingularityError : NumericError {
    using NumericError::NumericError;
};
struct DivergenceError : NumericError {
    using NumericError::NumericError;
};
// A quantity that makes the requested computation meaningless: an all-zero
// signal for a requested SNR, a metric with no valid pixels, ...
struct DegenerateSignalError : NumericError {
    using NumericError::NumericError;
};
// An internal precondition between cooperating components was violated
// (e.g. a frequency-domain system assembled for one problem handed to
// another). Indicates a caller bug, not bad data.
struct ContractViolationError : NumericError {
    using NumericError::NumericError;
};

}  // namespace civs
