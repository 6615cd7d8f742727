#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace volterra {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Deterministic path s -> R^d.
using Path = std::function<Vector(double)>;

/// Input rejected before any computation (bad parameters, malformed scenario).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical routine could not produce a trustworthy value.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// The model is well formed but some quantity is undefined for it
/// (e.g. a zero-energy kernel has no linear slope).
class DegenerateModelError : public std::domain_error {
public:
    explicit DegenerateModelError(const std::string& what) : std::domain_error(what) {}
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw ValidationError(message);
}

} // namespace volterra
