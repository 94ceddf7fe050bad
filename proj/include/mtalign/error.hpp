#pragma once

#include <stdexcept>
#include <string>

namespace mtalign {

/// Base class for every data or processing failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file content.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Zero variance, empty overlap and similar inputs on which a measure is undefined.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Argument outside an operation's domain (bad size, index, matrix, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

}  // namespace mtalign
