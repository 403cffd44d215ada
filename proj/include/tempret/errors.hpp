// Exception taxonomy for the tempret library.
//
// Every failure mode documented on the public operations maps to one of the
// concrete classes below, so callers (and the CLI) can translate an error
// class into a distinct exit code.

#pragma once

#include <stdexcept>
#include <string>

namespace tempret {

/// Base class for all tempret errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Shape or length mismatch between operands.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(what) {}
};

/// A runtime size exceeds a fixed capacity (e.g. more frames than T_max).
class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& what) : Error(what) {}
};

/// A validity mask selects nothing (all frames masked out).
class DegenerateMaskError : public Error {
public:
    explicit DegenerateMaskError(const std::string& what) : Error(what) {}
};

/// A score-matrix row has no scored entries to aggregate.
class DegenerateRowError : public Error {
public:
    explicit DegenerateRowError(const std::string& what) : Error(what) {}
};

/// An embedding cannot be normalized (zero norm); message names the id.
class NormalizationError : public Error {
public:
    explicit NormalizationError(const std::string& what) : Error(what) {}
};

/// A metric is undefined for the given input (e.g. no relevant items).
class UndefinedMetricError : public Error {
public:
    explicit UndefinedMetricError(const std::string& what) : Error(what) {}
};

/// Training cannot proceed (no positive pairs, non-finite loss, ...).
class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& what) : Error(what) {}
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Base class for binary file format violations.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(what) {}
};

/// File does not start with the expected magic; message names the expected one.
class BadMagicError : public FormatError {
public:
    explicit BadMagicError(const std::string& what) : FormatError(what) {}
};

/// File magic matches but the version field is unsupported.
class VersionMismatchError : public FormatError {
public:
    explicit VersionMismatchError(const std::string& what) : FormatError(what) {}
};

/// File ends before the payload announced in its header.
class TruncatedFileError : public FormatError {
public:
    explicit TruncatedFileError(const std::string& what) : FormatError(what) {}
};

/// Filesystem-level failure (cannot open/read/write).
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

} // namespace tempret
