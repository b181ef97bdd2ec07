#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thermomag {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Raised by brute-force routines asked to enumerate too large an instance.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Linear solve failed; carries the achieved relative residual.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Iterative minimization hit its iteration budget.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> last_iterate,
                     double objective, double projected_gradient, int iterations)
        : Error(what),
          last_iterate_(std::move(last_iterate)),
          objective_(objective),
          projected_gradient_(projected_gradient),
          iterations_(iterations) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
    double objective() const noexcept { return objective_; }
    double projected_gradient() const noexcept { return projected_gradient_; }
    int iterations() const noexcept { return iterations_; }

private:
    std::vector<double> last_iterate_;
    double objective_;
    double projected_gradient_;
    int iterations_;
};

/// Invalid configuration value; `key()` names the offending entry.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key.empty() ? what : "config key '" + key + "': " + what),
          key_(std::move(key)) {}
    /// Keeps `message` verbatim (already prefixed) while recording the key.
    static ConfigError rewrap(std::string key, const std::string& message) { return ConfigError(Verbatim{}, std::move(key), message); }
    const std::string& key() const noexcept { return key_; }

private:
    struct Verbatim {};
    ConfigError(Verbatim, std::string key, const std::string& message) : Error(message), key_(std::move(key)) {}
    std::string key_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace thermomag
