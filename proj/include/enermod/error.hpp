#pragma once

#include <charconv>
#include <stdexcept>
#include <string>

namespace enermod {

// Exit codes used by the command-line front end. Library code only throws;
// the mapping to process status lives here so tests can check it too.
enum class ErrorCode : int {
    generic = 1,
    usage = 2,
    missing_file = 3,
    parse = 4,
    invariant = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }
    const char* kind() const noexcept {
        switch (code_) {
        case ErrorCode::usage: return "usage";
        case ErrorCode::missing_file: return "missing_file";
        case ErrorCode::parse: return "parse";
        case ErrorCode::invariant: return "invariant";
        default: return "generic";
        }
    }

private:
    ErrorCode code_;
};

struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error(ErrorCode::parse, what) {}
};

struct InvariantError : Error {
    explicit InvariantError(const std::string& what) : Error(ErrorCode::invariant, what) {}
};

struct MissingFileError : Error {
    explicit MissingFileError(const std::string& path)
        : Error(ErrorCode::missing_file, "missing file: " + path) {}
};

// Shortest round-trip text for a double; stable across runs.
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

} // namespace enermod
