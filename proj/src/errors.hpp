#pragma once

#include <stdexcept>

namespace hmsr {

// Bad user input: config keys/values, impossible shapes requested at
// construction time, malformed CLI arguments. Maps to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Everything else (IO failures, non-finite numerics, ...) surfaces as a
// plain std::runtime_error and maps to exit code 2.

}  // namespace hmsr
