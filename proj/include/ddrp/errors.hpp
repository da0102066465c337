#pragma once

#include <stdexcept>
#include <string>

namespace ddrp {

// All library failures derive from Error so CLI code can catch one type and
// still report a meaningful category in the message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape or inner-dimension disagreement between operands.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error("dimension: " + what) {}
};

// Input violates a mathematical precondition (asymmetry, negative entries, ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain: " + what) {}
};

// Iterative decomposition failed to reach tolerance within its sweep cap.
class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& what) : Error("convergence: " + what) {}
};

// A quantity that must be invertible is numerically singular.
class SingularityError : public Error {
public:
    explicit SingularityError(const std::string& what) : Error("singularity: " + what) {}
};

// Malformed text input; message carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("parse: line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Inconsistent or unsupported combination of options.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

// Filesystem failure wrapped with the offending path.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io: " + what) {}
};

// Optimizer step produced a non-finite loss even after backtracking.
class StepSizeError : public Error {
public:
    explicit StepSizeError(const std::string& what) : Error("step-size: " + what) {}
};

} // namespace ddrp
