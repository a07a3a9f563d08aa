#pragma once

#include <stdexcept>
#include <string>

namespace hyperctrl {

/** @brief Base class of every error raised by the library. */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/** @brief A documented precondition of an operation does not hold. */
class PreconditionError : public Error {
public:
    using Error::Error;
};

/** @brief Input data lies outside the mathematical domain (non-positive speed, singular matrix). */
class DomainError : public Error {
public:
    using Error::Error;
};

/** @brief Invalid configuration: malformed JSON, bad grid, unknown preset. */
class ConfigError : public Error {
public:
    using Error::Error;
};

/** @brief Reading or writing a file failed. */
class IoError : public Error {
public:
    using Error::Error;
};

/** @brief A constructed object fails one of its defining identities. */
class ConstructionError : public Error {
public:
    using Error::Error;
};

}  // namespace hyperctrl
