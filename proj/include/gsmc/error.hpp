#pragma once

#include <stdexcept>
#include <string>

namespace gsmc {

// All library failures derive from Error so callers can catch one type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// Zero information: a variance or event count that makes a statistic undefined.
struct DegenerateError : Error {
    using Error::Error;
};

// A stopping time whose monitoring target is never reached before the horizon cap.
struct InfeasibleStageError : Error {
    using Error::Error;
};

// Drift is zero, so no finite sample size achieves the requested power.
struct NoEffectError : Error {
    using Error::Error;
};

struct UnsupportedWeightError : Error {
    using Error::Error;
};

struct UnsupportedModelError : Error {
    using Error::Error;
};

// Correlation inputs that cannot form a correlation matrix, even after repair.
struct InconsistentInputsError : Error {
    using Error::Error;
};

struct SolverError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    ConfigError(std::string key, const std::string& what)
        : Error("config key '" + key + "': " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace gsmc
