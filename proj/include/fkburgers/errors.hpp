#pragma once

#include <stdexcept>
#include <string>

namespace fkb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameter combination (FlowParams, configs, step counts ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Result not representable in double precision.
class RangeError : public Error {
public:
    RangeError(const std::string& what, double magnitude)
        : Error(what), magnitude_(magnitude) {}
    double magnitude() const noexcept { return magnitude_; }

private:
    double magnitude_;
};

/// A field or layout failed a sampled or structural validation.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Amplitude above the a priori cap of its annulus.
class AmplitudeError : public ValidationError {
public:
    AmplitudeError(const std::string& what, std::size_t zone, double cap)
        : ValidationError(what), zone_(zone), cap_(cap) {}
    std::size_t zone() const noexcept { return zone_; }
    double cap() const noexcept { return cap_; }

private:
    std::size_t zone_;
    double cap_;
};

/// A characteristic left the admissible region.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double escape_time)
        : Error(what), escape_time_(escape_time) {}
    double escape_time() const noexcept { return escape_time_; }

private:
    double escape_time_;
};

/// Ordered-exponential norm exceeded its blow-up guard.
class BlowupError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Operation invoked before the data it depends on exists.
class SequencingError : public Error {
public:
    using Error::Error;
};

class OracleError : public Error {
public:
    OracleError(const std::string& what, double achieved)
        : Error(what), achieved_(achieved) {}
    double achieved_tolerance() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Malformed or incomplete experiment configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace fkb
