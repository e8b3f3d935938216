#pragma once

#include <stdexcept>
#include <string>

namespace penn {

// Argument outside the domain of a model equation (excitation out of [0,1],
// arcsin argument past 1, joint angle outside the configured range, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Musculotendon geometry became inconsistent, e.g. the whole path shorter
// than the tendon slack length.
struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration file or schema violation. The config layer prefixes
// "file:line" where it knows the location.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runtime numerical failure: simulation divergence, NaN/inf loss,
// step size outside the stability envelope.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace penn
