#pragma once

#include <stdexcept>
#include <string>

namespace duo {

/// Malformed or inconsistent user input (bad files, bad flags, split misuse).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An internal invariant failed; indicates a bug rather than bad input.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace duo
