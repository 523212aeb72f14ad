#pragma once

#include <stdexcept>
#include <string>

namespace fewmol {

// Wrong wiring by the caller: mismatched keys, non-scalar loss, missing inputs.
struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

// Invalid configuration values: bad shapes fed to an op, bad flag combinations.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Math domain violations: log of a non-positive value, sqrt of a negative.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Malformed or inconsistent input files.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A property lacks the labeled molecules an episode needs.
struct EligibilityError : DataError {
    using DataError::DataError;
};

// A synthetic dataset spec cannot be satisfied.
struct GenerationError : DataError {
    using DataError::DataError;
};

// A metric is undefined for the given label set.
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fewmol
