#pragma once

#include <stdexcept>
#include <string>

namespace regopt {

// Base class for all toolkit errors. CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file. Message carries "line N" / field context when known.
class ParseError : public Error {
public:
    using Error::Error;
};

// Structurally well-formed input that violates a domain invariant
// (unknown bin id, out-of-domain control value, space mismatch, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace regopt
