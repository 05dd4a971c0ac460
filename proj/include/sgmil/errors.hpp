#pragma once

#include <stdexcept>
#include <string>

namespace sgmil {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad layer composition, unknown ids, out-of-range hyperparameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// API misuse: empty bags, backward without a recorded graph, mismatched lengths.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Malformed data values (non-finite inputs, labels outside {0,1}).
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents. `offset` is the byte position where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Non-finite values detected during optimization or gradient checking.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A metric that is not defined for the given input (e.g. AUC with one class).
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

}  // namespace sgmil
