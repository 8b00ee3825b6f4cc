#pragma once

#include <stdexcept>
#include <string>

namespace ice {

// Bad arguments or malformed inputs: dimension mismatches, invalid labels,
// out-of-range configuration. Thrown before any numeric work starts.
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values produced during accumulation or optimization.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what, long row = -1)
        : std::runtime_error(what), row_index(row) {}
    long row_index;  // offending observation, -1 if not row-specific
};

// J-hat not invertible even after the jitter ladder.
class SingularInformation : public std::runtime_error {
public:
    SingularInformation(const std::string& what, double cond)
        : std::runtime_error(what), condition_estimate(cond) {}
    double condition_estimate;
};

// MLE diverging along a separating direction.
class SeparationError : public std::runtime_error {
public:
    SeparationError(const std::string& what, int coord)
        : std::runtime_error(what), coordinate(coord) {}
    int coordinate;
};

// Synthetic problem rejected more times than the attempt budget allows.
class GenerationError : public std::runtime_error {
public:
    explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ice
