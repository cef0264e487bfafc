#pragma once

#include <stdexcept>
#include <string>

namespace tdd {

// Error taxonomy shared by all modules. The CLI maps these onto process
// exit codes: ArgumentError -> 1, format/data/io -> 2, NumericError -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad caller input: invalid argument values, invalid configuration.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Malformed container header, manifest, or checkpoint structure.
class FormatError : public Error {
public:
    using Error::Error;
};

// Payload length disagrees with declared dimensions.
class SizeError : public FormatError {
public:
    using FormatError::FormatError;
};

// Well-formed file carrying invalid values (NaN/Inf, non-binary mask).
class DataError : public Error {
public:
    using Error::Error;
};

// Filesystem failure: unreadable/unwritable path.
class IoError : public Error {
public:
    using Error::Error;
};

// Numerical failure: non-finite gradient, non-PD covariance, diverged loss.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace tdd
