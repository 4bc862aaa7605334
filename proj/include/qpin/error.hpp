#pragma once

#include <stdexcept>
#include <string>

namespace qpin {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Grid, window or basis configuration that cannot support the requested computation.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative or adaptive method gave up. Carries its best estimate when one exists.
class NumericFailure : public std::runtime_error {
public:
    explicit NumericFailure(const std::string& what, double best_estimate = 0.0)
        : std::runtime_error(what), best_estimate_(best_estimate) {}

    double best_estimate() const noexcept { return best_estimate_; }

private:
    double best_estimate_;
};

}  // namespace qpin
