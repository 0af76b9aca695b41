#pragma once

#include <stdexcept>
#include <string>

namespace medseq {

/// Base class for all medseq errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file content (standoff, feature sidecar, embedding text, ...).
struct ParseError : Error {
    using Error::Error;
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number = 0;
};

/// Offset outside the addressed text.
struct BoundsError : Error {
    using Error::Error;
};

/// A name outside its closed set (entity class, semantic tag).
struct UnknownNameError : Error {
    using Error::Error;
};

/// Invalid configuration or flag combination.
struct ConfigError : Error {
    using Error::Error;
};

/// Inconsistent or missing data (directory mismatches, shape mismatches, ...).
struct DataError : Error {
    using Error::Error;
};

/// Problem instance too large for an exhaustive oracle.
struct SizeError : Error {
    using Error::Error;
};

/// Non-finite loss during optimization.
struct DivergenceError : Error {
    DivergenceError(int epoch, int batch)
        : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                std::to_string(batch)),
          epoch(epoch),
          batch(batch) {}
    int epoch = 0;
    int batch = 0;
};

/// Filesystem failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace medseq
