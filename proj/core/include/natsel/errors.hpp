#pragma once

#include <stdexcept>
#include <string>

namespace natsel {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad inputs: malformed records, violated preconditions, invalid config.
struct ValidationError : Error {
    using Error::Error;
};

// Filesystem failures on reads/writes the caller asked for.
struct IoError : Error {
    using Error::Error;
};

// Remote transport gave up (exhausted retries, timeout, connection refused).
struct TransportError : Error {
    using Error::Error;
};

// The remote service answered, but the answer violates the wire contract
// (length mismatch, positive log-prob, non-finite values, 4xx).
struct ProtocolError : Error {
    using Error::Error;
};

} // namespace natsel
