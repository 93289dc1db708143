#pragma once

#include <stdexcept>
#include <string>

namespace strokebench {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or layer extents do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed input bytes (XML, CSV, PPM, RGBV, checkpoint, config).
class ParseError : public Error {
public:
    using Error::Error;
};

/// File system failure or unreadable resource.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace strokebench
