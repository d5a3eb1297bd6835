#pragma once

#include <stdexcept>
#include <string>

namespace crowdforge {

// Caller broke an API precondition (wrong variant for the task, bad index, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Input data or configuration failed validation (out-of-range label, duplicate
// annotation, fraction sum mismatch, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file contents; message carries the line number where known.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values or degenerate statistics met mid-computation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace crowdforge
