#pragma once

#include <stdexcept>
#include <string>

namespace pglf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: violated precondition, malformed config, inconsistent sizes.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure could not produce a result (singular system,
/// non-convergence, focal singularity).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// File system or format failure.
class IoError : public Error {
public:
    using Error::Error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw ValidationError(message);
}

} // namespace pglf
