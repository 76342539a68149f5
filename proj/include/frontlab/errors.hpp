#pragma once

#include <stdexcept>
#include <string>

namespace frontlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameters or configuration (CLI exit code 2).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Configuration key problems: unknown key, type mismatch, bad value.
class ConfigError : public ParameterError {
public:
    ConfigError(const std::string& key, const std::string& what)
        : ParameterError("config key '" + key + "': " + what), key_(key) {}

    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// Failures of a numerical procedure (CLI exit code 3).
class NumericalError : public Error {
public:
    enum class Kind {
        no_wave,
        integration,
        step_size,
        domain,
        tracking,
        fit,
        sandwich,
        invariant,
    };

    NumericalError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

}  // namespace frontlab
