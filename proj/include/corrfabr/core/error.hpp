#pragma once

#include <stdexcept>
#include <string>

namespace corrfabr {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated preconditions, malformed configs, bad file contents.
// The CLI maps these to exit code 1; anything else becomes 2.
struct InputError : Error {
    using Error::Error;
};

// Filesystem and OS-level failures.
struct IoError : Error {
    using Error::Error;
};

}  // namespace corrfabr
