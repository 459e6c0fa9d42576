#pragma once

#include <stdexcept>
#include <string>

namespace ajepa {

// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// File exists but its contents are not a valid container (bad magic,
// truncated payload, inconsistent record lengths).
struct CorruptFileError : Error {
    explicit CorruptFileError(const std::string& msg) : Error(msg) {}
};

// Container parsed but was written by an incompatible format version.
struct VersionMismatchError : Error {
    explicit VersionMismatchError(const std::string& msg) : Error(msg) {}
};

// Tensor shapes disagree with what the receiving configuration expects.
struct ShapeMismatchError : Error {
    explicit ShapeMismatchError(const std::string& msg) : Error(msg) {}
};

// Configuration file / override problems: unknown key, unparsable value,
// violated invariant. The message names the key and the constraint.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace ajepa
