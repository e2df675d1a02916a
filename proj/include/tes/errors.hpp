#ifndef TES_ERRORS_HPP
#define TES_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tes {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed argument: wrong dimension, non-finite value, bad index.
class InvalidInput : public Error {
public:
  using Error::Error;
};

/// Inconsistent or missing configuration.
class InvalidConfig : public Error {
public:
  using Error::Error;
};

/// A linear solve or factorization failed.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// The filter estimate became non-finite.
class FilterDivergence : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// The adaptive integrator could not make progress.
class StiffnessError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

} // namespace tes

#endif // TES_ERRORS_HPP
