#pragma once

#include <stdexcept>
#include <string>

namespace flg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scene generation could not place all blocks within the attempt budget.
class PlacementError : public Error {
public:
    using Error::Error;
};

class UnknownVariantError : public Error {
public:
    using Error::Error;
};

/// Tensor or grid dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

class OutOfRangeError : public Error {
public:
    using Error::Error;
};

class KindMismatchError : public Error {
public:
    using Error::Error;
};

/// File does not start with the expected magic or carries an unknown version.
class FormatError : public Error {
public:
    using Error::Error;
};

/// File is truncated or its checksum does not match.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class NoFeasibleActionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace flg
