#pragma once

#include <stdexcept>
#include <string>

namespace nmlrd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// An enumeration or table would exceed its configured size guard.
class ResourceLimit : public Error {
public:
    using Error::Error;
};

/// The requested exact method is unavailable for these inputs.
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated bit stream / container.
class FramingError : public Error {
public:
    using Error::Error;
};

/// Encoder index search ran past its cap.
class SearchOverflow : public Error {
public:
    using Error::Error;
};

} // namespace nmlrd
