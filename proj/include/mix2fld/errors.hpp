#pragma once

#include <stdexcept>
#include <string>

namespace mix2fld {

// Bad user-supplied configuration (dimensions, ranges, file keys).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (files, datasets, sample pools).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Out-of-range scalar parameter (lambda, eta, ...).
struct ParameterError : std::runtime_error {
    explicit ParameterError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values produced where finite math was expected.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// The cyclic ratio matrix is singular or nearly so (|pivot| < 1e-10).
struct SingularRatioError : std::runtime_error {
    explicit SingularRatioError(const std::string& msg) : std::runtime_error(msg) {}
};

// Two mixed samples cannot be inverse-mixed (label mismatch, ratio mismatch).
struct PairingError : std::runtime_error {
    explicit PairingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inverse-mixing samples that originate from the same device is forbidden.
struct PrivacyConstraintError : std::runtime_error {
    explicit PrivacyConstraintError(const std::string& msg) : std::runtime_error(msg) {}
};

// No device uploaded successfully this round; the global update is skipped.
struct NoParticipantsError : std::runtime_error {
    NoParticipantsError() : std::runtime_error("no participating devices") {}
};

// Server-side conversion cannot run (empty seed set).
struct ConversionError : std::runtime_error {
    explicit ConversionError(const std::string& msg) : std::runtime_error(msg) {}
};

// A metric was requested over an empty sample set.
struct UndefinedMetricError : std::runtime_error {
    explicit UndefinedMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mix2fld
