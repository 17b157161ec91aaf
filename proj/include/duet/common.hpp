#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace duet {

inline constexpr const char* kVersion = "0.1.0";

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data.
class ParseError : public Error {
public:
    using Error::Error;
};

// Array arity or shape violates a contract.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Out-of-range or otherwise invalid argument value.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// An operation that needs data received none.
class NoDataError : public Error {
public:
    using Error::Error;
};

// A sequence starts in a state that cannot be repaired.
class UnrecoverableStartError : public Error {
public:
    using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Missing or inconsistent runtime state (e.g. stats not loaded).
class StateError : public Error {
public:
    using Error::Error;
};

// Filesystem trouble.
class IoError : public Error {
public:
    using Error::Error;
};

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw ParseError("invalid numeric literal: '" + std::string(text) + "'");
    }
    return v;
}

}  // namespace duet
