#pragma once

#include <stdexcept>
#include <string>

namespace hdt {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes do not line up for the requested operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A numeric argument is outside its documented range.
class ParameterError : public Error {
public:
    using Error::Error;
};

// Model/config/checkpoint disagreement (wrong variate count, tau mismatch, ...).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

// An object is in the wrong state for the call (empty sample set, no windows, ...).
class StateError : public Error {
public:
    using Error::Error;
};

// A discrete index is out of range (token ids, embedding rows).
class IndexError : public Error {
public:
    using Error::Error;
};

// Input file could not be parsed; message carries line/column where known.
class IngestionError : public Error {
public:
    using Error::Error;
};

// Training hit a non-recoverable numeric condition (NaN loss, non-finite grad).
class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace hdt
