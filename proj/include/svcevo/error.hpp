#pragma once

#include <stdexcept>
#include <string>

namespace svcevo {

/// Base class for every error raised by the library. Messages are meant to
/// be shown to the user verbatim by the CLI.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the file name and 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

} // namespace svcevo
