#pragma once

#include <stdexcept>
#include <string>

namespace fdnet {

/// Shape disagreement between operands; the message carries both shapes.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid user-facing configuration (network spec, problem name, CLI flags).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Iterative solver failed to reach its tolerance.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training loop produced a non-finite loss or lost internal consistency.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed on-disk artifact (grid dump, checkpoint).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fdnet
