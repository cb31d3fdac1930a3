#pragma once

#include <stdexcept>
#include <string>

namespace dfigss {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input violates a documented invariant (bad parameter, malformed data).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Network topology problem (disconnected graph, missing slack, unknown id).
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Iterative solver did not reach its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Linear system or eigenproblem is singular or defective.
class SingularError : public Error {
public:
    using Error::Error;
};

/// Wraps an error with the pipeline stage that produced it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace dfigss
