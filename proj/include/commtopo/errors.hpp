#pragma once

#include <stdexcept>
#include <string>

namespace commtopo {

/// Violated input contract (bad dimensions, out-of-range parameters, ...).
/// The CLI maps this to exit code 2.
struct precondition_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Cross-check between two independent computation routes failed.
/// The CLI maps this to exit code 3.
struct verification_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Simulation produced non-finite values.
struct divergence_error : std::runtime_error {
    divergence_error(const std::string& what, int step)
        : std::runtime_error(what + " at step " + std::to_string(step)), step(step) {}
    int step;
};

}  // namespace commtopo
