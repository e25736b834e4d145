#pragma once

#include <stdexcept>
#include <string>

namespace pnsg {

/// Exit codes of the command-line driver. Stable contract.
enum class ExitCode : int { ok = 0, validation = 1, numerical = 2, io = 3 };

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::numerical; }
};

/// Bad input: configuration values, indices out of range, malformed arguments.
class ValidationError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::validation; }
};

/// Numerical breakdown (solver divergence, singular systems, step underflow).
class NumericalError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double final_residual)
        : NumericalError(what), residual_(final_residual) {}
    double final_residual() const noexcept { return residual_; }

private:
    double residual_;
};

class IllConditionedBasis : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IoError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::io; }
};

/// Parse failure in one of the artifact's own file formats; carries the 1-based line.
class ParseError : public IoError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& msg)
        : IoError(file + ":" + std::to_string(line) + ": " + msg), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace pnsg
