#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace harvest {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input, located by byte offset (documents) or line number (files).
class ParseError : public Error {
public:
    ParseError(std::string what, std::size_t offset, std::size_t line = 0)
        : Error(std::move(what)), offset_(offset), line_(line) {}

    std::size_t offset() const noexcept { return offset_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t offset_;
    std::size_t line_;
};

class ValidationError : public Error {
public:
    ValidationError(std::string what, std::size_t line = 0) : Error(std::move(what)), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class StructuralError : public Error {
public:
    using Error::Error;
};

}  // namespace harvest
