#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lfmc {

/// Bad arguments: dimension mismatch, non-positive costs, bad indices.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Kernel matrix stayed singular through the whole jitter ladder.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Quadrature failed to converge. `raw` holds the unrenormalized estimates.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::vector<double> raw_values)
        : std::runtime_error(what), raw(std::move(raw_values)) {}

    std::vector<double> raw;
};

/// Invalid run configuration. `field` names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field_name, const std::string& what)
        : std::invalid_argument(field_name + ": " + what), field(std::move(field_name)) {}

    std::string field;
};

/// A model (analytic or external) could not produce a response.
class ModelEvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// External model replied with something that is not a valid protocol line.
class ProtocolError : public ModelEvaluationError {
public:
    using ModelEvaluationError::ModelEvaluationError;
};

/// Output files or directories could not be written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lfmc
