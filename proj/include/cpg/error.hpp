#pragma once

#include <stdexcept>
#include <string>

namespace cpg {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape, width or length mismatch between arguments.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An operation would move an owned weight; aborting is the only safe answer.
class OwnershipError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input files.
class DataError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

/// The requested accuracy goal cannot be met with the current model.
class GoalUnreachable : public Error {
public:
    GoalUnreachable(const std::string& what, double achieved)
        : Error(what), achieved_(achieved) {}
    double achieved() const { return achieved_; }

private:
    double achieved_;
};

}  // namespace cpg
