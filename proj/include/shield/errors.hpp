#pragma once

#include <stdexcept>
#include <string>

namespace shield {

/// Non-finite or otherwise malformed argument.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operation undefined on its input domain (e.g. empty obstacle set).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Requested barrier level is at or above the barrier's supremum.
class InfeasibleLevel : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Initial barrier value is negative, so no exit bound applies.
class AlreadyUnsafe : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No decay rate in (0, 1) meets the requested exit probability.
class InfeasibleRisk : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Robot position coincides with an obstacle center.
class DegenerateDirection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Box and half-space do not intersect.
class InfeasibleProjection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No grid path between start and goal.
class Unreachable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Base for weight-file problems; the subclasses let callers tell them apart.
class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingFileError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};

class VersionMismatchError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};

class ShapeError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};

}  // namespace shield
