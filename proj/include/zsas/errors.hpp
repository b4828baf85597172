#pragma once

#include <stdexcept>
#include <string>

namespace zsas {

/// Base of every error the library throws.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value; the message names the offending field.
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Malformed or inconsistent data (non-finite values, shape mismatches, bad files).
class DataError : public Error
{
public:
    using Error::Error;
};

/// An operation needed at least one foreground pixel and got none.
class EmptyRegionError : public Error
{
public:
    using Error::Error;
};

/// A feature vector that cannot be used for cosine similarity (all zero).
class DegenerateFeatureError : public Error
{
public:
    using Error::Error;
};

/// A backend violated its declared interface (tensor names, shapes, metadata).
class ContractError : public Error
{
public:
    using Error::Error;
};

/// Failure raised while a backend was running; carries the cascade stage when known.
class BackendError : public Error
{
public:
    explicit BackendError(const std::string& what, int stage = 0)
        : Error(stage > 0 ? "stage " + std::to_string(stage) + ": " + what : what),
          stage_(stage)
    {}

    int stage() const noexcept { return stage_; }

private:
    int stage_;
};

/// A metric was requested on inputs for which it is not defined.
class UndefinedMetricError : public Error
{
public:
    using Error::Error;
};

/// Dataset layout problems (missing ground truth, unreadable directories).
class IndexingError : public Error
{
public:
    using Error::Error;
};

}  // namespace zsas
