#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace taps {

using LocationId = std::uint32_t;
using EntityId = std::uint32_t;
using FamilyId = std::uint32_t;

// Dense index into a RelayUniverse, stable across a consensus sequence.
using RelayRef = std::uint32_t;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: rejected before any work starts. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Unknown id or address passed to a lookup.
struct LookupError : Error {
    using Error::Error;
};

// IP address with no covering prefix in the map. Callers that iterate
// streams must skip the destination rather than abort.
struct UnmappedAddressError : LookupError {
    using LookupError::LookupError;
};

// Corrupt or truncated byte stream; carries the offset of the first bad byte.
struct FormatError : Error {
    std::size_t offset;
    FormatError(std::size_t off, const std::string& what)
        : Error(what + " (at offset " + std::to_string(off) + ")"), offset(off) {}
};

// Malformed arguments to an in-process call (length mismatch, empty input).
struct ArgumentError : Error {
    using Error::Error;
};

// No relay satisfies the position's eligibility filters.
struct SelectionError : Error {
    using Error::Error;
};

// Consensus timestamps not strictly increasing.
struct OrderingError : Error {
    using Error::Error;
};

}  // namespace taps
