#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdde {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    enum class Kind { syntax, unknown_identifier, arity };

    ParseError(Kind kind, std::size_t offset, const std::string& message)
        : Error(message + " (at offset " + std::to_string(offset) + ")"), kind_(kind), offset_(offset) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    Kind kind_;
    std::size_t offset_;
};

/// A model hypothesis failed at runtime: y left the maturity ball, no threshold
/// crossing before the horizon, or the prehistory is too steep.
class AssumptionViolation : public Error {
public:
    using Error::Error;
};

/// The state v left the declared (and validated) range.
class RangeExit : public Error {
public:
    RangeExit(const std::string& message, double time, double value)
        : Error(message), time_(time), value_(value) {}

    double time() const noexcept { return time_; }
    double value() const noexcept { return value_; }

private:
    double time_;
    double value_;
};

class BlowUp : public Error {
public:
    BlowUp(const std::string& message, double time) : Error(message), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

class ConvergenceFailure : public Error {
public:
    ConvergenceFailure(const std::string& message, double last_ratio)
        : Error(message), last_ratio_(last_ratio) {}
    double last_ratio() const noexcept { return last_ratio_; }

private:
    double last_ratio_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace sdde
