#pragma once

#include <stdexcept>
#include <string>

namespace fbmps {

/// Shape/extent mismatches in tensor operations.
struct dimension_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Invalid argument values (non-normalized states, bad indices, ...).
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Non-finite data where finite numbers are required.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operation attempted with the orthogonality center in the wrong place.
struct gauge_error : std::logic_error {
    using std::logic_error::logic_error;
};

/// Misuse of an interface (non-contiguous spans, wrong call order).
struct usage_error : std::logic_error {
    using std::logic_error::logic_error;
};

/// Problem size exceeds what the requested resources can represent.
struct capacity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Configuration file/value problems; carries a line number when known.
struct config_error : std::runtime_error {
    int line = 0;
    explicit config_error(const std::string& msg, int line_ = 0)
        : std::runtime_error(line_ > 0 ? "line " + std::to_string(line_) + ": " + msg : msg),
          line(line_) {}
};

/// Observable bookkeeping that fails to reconcile.
struct accounting_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Trajectory window too short for the requested analysis.
struct insufficient_data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace fbmps
