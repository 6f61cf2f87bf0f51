#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stampacchia {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A parameter lies outside the domain the formulas are defined on.
class DomainError : public Error {
  public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// An operation was asked for a beta regime it does not cover.
class RegimeError : public Error {
  public:
    explicit RegimeError(const std::string& msg) : Error(msg) {}
};

/// Malformed input data (grids, fields, configuration).
class InputError : public Error {
  public:
    explicit InputError(const std::string& msg) : Error(msg) {}
};

/// Not enough usable points for a fit.
class FitError : public Error {
  public:
    explicit FitError(const std::string& msg) : Error(msg) {}
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public Error {
  public:
    ConvergenceError(const std::string& msg, double last_residual,
                     std::vector<double> history = {})
        : Error(msg), last_residual_(last_residual), history_(std::move(history)) {}

    double last_residual() const { return last_residual_; }
    const std::vector<double>& history() const { return history_; }

  private:
    double last_residual_;
    std::vector<double> history_;
};

}  // namespace stampacchia
