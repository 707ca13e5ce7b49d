#pragma once

#include <stdexcept>

namespace ssp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file content (bad JSON line, wrong CSV arity, unreadable file).
struct ParseError : Error { using Error::Error; };

// Well-formed input that violates a documented data invariant.
struct ValidationError : Error { using Error::Error; };

// Bad run configuration: unknown key, invalid option value, excluded
// dialect/strategy pair, unknown signal or configuration id.
struct ConfigError : Error { using Error::Error; };

// Few-shot bank cannot supply the requested examples for a task.
struct FewShotUnavailableError : Error { using Error::Error; };

// Network-level failure that survived the retry policy.
struct TransportError : Error { using Error::Error; };

// Backend answered with a non-success HTTP status or an unusable body.
struct BackendError : Error { using Error::Error; };

// Statistical routine handed an invalid table or a degenerate sample.
struct StatError : Error { using Error::Error; };

// Separation or non-convergence detected by an estimator's guard.
struct DivergenceError : Error { using Error::Error; };

// Duplicate or mutually inconsistent records (journal, correctness cells).
struct IntegrityError : Error { using Error::Error; };

}  // namespace ssp
