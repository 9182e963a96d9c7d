#pragma once

#include <stdexcept>
#include <string>

namespace esdgait {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied arguments that violate a documented precondition.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A mathematical quantity left its domain (non-positive capacitance, negative frequency, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

/// Finite difference stencil would leave the simulated interval.
class BoundaryError : public Error {
public:
  using Error::Error;
};

/// Induced-current evaluation at zero radial distance.
class SingularityError : public Error {
public:
  using Error::Error;
};

/// A configuration that cannot produce a usable object (e.g. mel filter with no bins).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Zero-variance signal handed to standardization.
class DegenerateSignalError : public Error {
public:
  using Error::Error;
};

/// Signal shorter than one analysis window.
class TooShortError : public Error {
public:
  using Error::Error;
};

/// Categorical value with no entry in the category map.
class EncodingError : public Error {
public:
  using Error::Error;
};

/// MDI requested from a forest without any split.
class UndefinedImportanceError : public Error {
public:
  using Error::Error;
};

/// Chunk timestamps out of order, overlapping or leaving gaps.
class StreamError : public Error {
public:
  using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace esdgait
