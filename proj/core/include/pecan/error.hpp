#pragma once

#include <stdexcept>
#include <string>

namespace pecan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor extents or layer geometry do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A value violates a documented domain constraint (tau <= 0, p == 0, ...).
class ValueError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or mismatched file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Configuration text rejected; the message carries the line number.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(int epoch, const std::string& what)
        : Error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

} // namespace pecan
