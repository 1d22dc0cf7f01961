#pragma once

#include <stdexcept>
#include <string>

namespace paneitz {

/// Bad construction parameters (resolution too low, nonpositive sizes, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke an API contract (dimension mismatch, zero vector, index out of range).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation is only defined on a subset of the backend kinds.
class UnsupportedBackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A function left the truncated basis; carries the truncation that would suffice.
class TruncationError : public std::runtime_error {
public:
    TruncationError(const std::string& msg, int required)
        : std::runtime_error(msg), required_degree(required) {}
    int required_degree;
};

/// Numerical failure: ill-conditioned mass matrix, Newton stagnation, ...
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A hypothesis required by the construction fails at some quadrature node.
class HypothesisViolationError : public std::runtime_error {
public:
    HypothesisViolationError(const std::string& msg, int node)
        : std::runtime_error(msg), worst_node(node) {}
    int worst_node;
};

/// Input map does not land on the unit sphere at the nodes.
class InvalidMapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace paneitz
