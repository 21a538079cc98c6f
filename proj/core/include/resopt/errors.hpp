#pragma once

#include <stdexcept>
#include <string>

namespace resopt {

// Bad configuration or schema: unknown key, invalid value, inconsistent setup.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid call arguments: dimension mismatch, non-finite input, infeasible start.
class ArgumentError : public std::runtime_error {
public:
    explicit ArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

// Linear algebra failure; carries the offending relative residual.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& msg, double residual)
        : std::runtime_error(msg), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_ = 0.0;
};

// Flow-stress coupling loop failed to converge; carries the last pressure-change norm.
class CouplingError : public std::runtime_error {
public:
    CouplingError(const std::string& msg, double last_change_pa)
        : std::runtime_error(msg), last_change_pa_(last_change_pa) {}
    double last_change_pa() const { return last_change_pa_; }

private:
    double last_change_pa_ = 0.0;
};

// Malformed persisted artifact (model file, dataset, trajectory CSV).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace resopt
