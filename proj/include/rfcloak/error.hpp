#pragma once

#include <stdexcept>
#include <string>

namespace rfcloak {

// Base for every error the library raises on contract violations.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Buffer or sequence lengths disagree with what a configuration implies.
class SizeError : public Error {
public:
    using Error::Error;
};

// Tensor shapes do not match a model or a sample layout.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Perturbation power exceeds the configured cap.
class BudgetError : public Error {
public:
    using Error::Error;
};

// Invalid user configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Malformed or incompatible dataset/checkpoint file.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace rfcloak
