#pragma once

#include <stdexcept>
#include <string>

namespace ttsa {

/// Invalid configuration, parameters, or preconditions. Maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// No schedule satisfying the step-size conditions exists in the search range.
struct InfeasibleError : ConfigError {
    using ConfigError::ConfigError;
};

/// An iterate left the finite / below-threshold region. Maps to exit code 3.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& msg, long long iteration, int replication = -1)
        : std::runtime_error(msg), iteration(iteration), replication(replication) {}

    long long iteration;
    int replication;  // -1 when not inside a replication loop
};

}  // namespace ttsa
