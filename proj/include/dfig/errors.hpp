#pragma once

#include <stdexcept>
#include <string>

namespace dfig {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear-algebra failures: singular matrices, uncontrollable pairs, non-convergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A value outside the domain of a model function (e.g. Cp at a negative tip-speed ratio).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid parameter sets or configuration documents. `key()` names the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    [[nodiscard]] const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Raised when a closed-loop run leaves its valid region (NaN/Inf, nonpositive rotor speed).
class SimulationAbort : public Error {
public:
    SimulationAbort(double t, const std::string& what) : Error(what), time_(t) {}

    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

}  // namespace dfig
