#pragma once

#include <stdexcept>
#include <string>

namespace cdma {

/// Argument outside the domain where an operation is defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A probability law or prior fails one of its defining constraints.
class ConstraintViolation : public std::invalid_argument {
public:
    ConstraintViolation(std::string constraint, const std::string& what)
        : std::invalid_argument(constraint + ": " + what),
          constraint_(std::move(constraint)) {}

    [[nodiscard]] const std::string& constraint() const { return constraint_; }

private:
    std::string constraint_;
};

/// Quadrature, root finding or iteration did not reach its tolerance.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Request exceeds a hard computational bound (e.g. enumeration size).
class CapabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace cdma
