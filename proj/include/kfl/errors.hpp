#pragma once

#include <stdexcept>
#include <string>

namespace kfl {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

struct CovarianceError : Error {
    explicit CovarianceError(const std::string& what) : Error("covariance", what) {}
};

struct InstabilityError : Error {
    explicit InstabilityError(const std::string& what) : Error("instability", what) {}
};

struct ConfigError : Error {
    ConfigError(std::string field, const std::string& what)
        : Error("config", field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double last_residual)
        : Error("convergence", what), last_residual(last_residual) {}

    double last_residual;
};

struct LinearSolveError : Error {
    explicit LinearSolveError(const std::string& what) : Error("linear_solve", what) {}
};

struct ConsistencyError : Error {
    explicit ConsistencyError(const std::string& what) : Error("consistency", what) {}
};

/// Raised when a learner touches information its contract forbids
/// (off-schedule queries, state access by an output-only estimator).
struct ContractViolation : Error {
    explicit ContractViolation(const std::string& what) : Error("contract", what) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error("domain", what) {}
};

}  // namespace kfl
