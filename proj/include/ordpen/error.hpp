#pragma once

#include <stdexcept>
#include <string>

namespace ordpen {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parameters do not match the dataset (wrong group count, wrong group length).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Dataset contents violate the model's domain (levels out of range, NA, ...).
class DataError : public Error {
public:
    using Error::Error;
};

// Thresholds out of order, producing a negative category probability.
class ProbabilityError : public Error {
public:
    using Error::Error;
};

// Unpenalized maximum likelihood does not exist or the Newton iteration diverged.
class SeparationError : public Error {
public:
    using Error::Error;
};

// Invalid user configuration (solver settings, penalty grid, CLI flags).
class ConfigError : public Error {
public:
    using Error::Error;
};

// A computation could not produce any usable result (e.g. every CV fit failed).
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace ordpen
