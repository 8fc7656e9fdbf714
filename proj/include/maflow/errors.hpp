#pragma once

#include <stdexcept>
#include <string>

namespace maflow {

// Invalid configuration values, dimension mismatches when wiring nets.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse: stepping a terminal state, backward on a multi-output tape, ...
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values in gradients, losses or flow outputs.
struct DivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Oracle self-checks failed (non-convergent quadrature, bound violations).
struct OracleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace maflow
