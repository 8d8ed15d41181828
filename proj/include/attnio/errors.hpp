#pragma once

#include <stdexcept>
#include <string>

namespace attnio {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad dimensions, non-finite inputs, values outside a documented domain.
struct argument_error : error {
    using error::error;
};

// Exact integer combinatorics left the 128-bit range.
struct overflow_error : error {
    using error::error;
};

// A basis or sweep would exceed desk scale.
struct capacity_error : error {
    using error::error;
};

// No even degree <= 64 certifies the requested relative error on [-D, D].
struct degree_overflow_error : error {
    using error::error;
};

// Entry magnitudes put the instance outside the polynomial scheme's reach.
struct entries_too_large_error : error {
    using error::error;
};

// A schedule's tile geometry is infeasible for the given (n, d, g, M).
struct planning_error : error {
    using error::error;
};

// Simulator rejections.
struct simulation_error : error {
    using error::error;
};
struct capacity_exceeded_error : simulation_error {
    using simulation_error::simulation_error;
};
struct operand_not_resident_error : simulation_error {
    using simulation_error::simulation_error;
};
struct load_unmaterialized_error : simulation_error {
    using simulation_error::simulation_error;
};
struct missing_output_error : simulation_error {
    using simulation_error::simulation_error;
};

} // namespace attnio
