#pragma once

#include <stdexcept>
#include <string>

namespace sbd {

/// Base class for every error raised by the library. Subclasses name the
/// failure category so callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad magic bytes or an unparseable header.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Payload length disagrees with the declared dimensions.
class TruncationError : public Error {
public:
    using Error::Error;
};

/// Data violates an invariant (non-finite intensity, size mismatch, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Caller-supplied parameter outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input outside the mathematical domain of an operation (negative counts, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// External denoiser exited with a non-zero status. what() carries its stderr.
class ExternalError : public Error {
public:
    using Error::Error;
};

/// External denoiser violated the file protocol (missing or mis-sized output).
class ProtocolError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public Error {
public:
    using Error::Error;
};

/// Malformed JSON configuration or manifest.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace sbd
