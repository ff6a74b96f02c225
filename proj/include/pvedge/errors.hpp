#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pvedge {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was not met by its arguments.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Configuration file or command line could not be turned into a valid experiment.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The state left the declared domain or |b1| fell below the model floor.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Overflow or NaN during path construction.
class SimulationDiverged : public Error {
public:
    SimulationDiverged(std::size_t fine_index, const std::string& what)
        : Error("simulation diverged at fine index " + std::to_string(fine_index) + ": " + what),
          index_(fine_index) {}
    std::size_t fine_index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// The first-variation process hit zero where it must be inverted.
class DegenerateVariation : public Error {
public:
    using Error::Error;
};

/// A power function derivative was requested at a singular point.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Studentization with a nonpositive variance estimate.
class NonpositiveVariance : public Error {
public:
    using Error::Error;
};

/// Sample without enough spread (zero bandwidth, zero variance, ...).
class DegenerateSample : public Error {
public:
    using Error::Error;
};

/// Too many replications of an experiment failed.
class FailureThreshold : public Error {
public:
    using Error::Error;
};

}  // namespace pvedge
