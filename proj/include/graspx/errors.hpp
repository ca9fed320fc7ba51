#pragma once

#include <stdexcept>
#include <string>

namespace graspx {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Object validation
struct NonStochasticRow : Error {
    using Error::Error;
};
struct OutOfRangeQuality : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct AllPosesRemoved : Error {
    using Error::Error;
};
struct IndexOutOfRange : Error {
    using Error::Error;
};

// Policies
struct MissingPrior : Error {
    using Error::Error;
};

// Analysis
struct SingularSystem : Error {
    using Error::Error;
};
struct Unreachable : Error {
    using Error::Error;
};
struct DegenerateBound : Error {
    using Error::Error;
};
struct EpisodeCap : Error {
    using Error::Error;
};

// Generators / configuration
struct InvalidParams : Error {
    using Error::Error;
};
struct MixedHorizons : Error {
    using Error::Error;
};

} // namespace graspx
