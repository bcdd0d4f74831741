#pragma once

#include <stdexcept>
#include <string>

namespace phigamma {

// Exit-code classes used by the command line front end.
struct MathError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvariantFailure : MathError {
    using MathError::MathError;
};

struct PrecisionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DepthExceeded : MathError {
    using MathError::MathError;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line = 0, int column = 0)
        : std::runtime_error(format(msg, line, column)), line(line), column(column) {}
    int line;
    int column;

  private:
    static std::string format(const std::string& msg, int line, int column) {
        if (line <= 0) return msg;
        return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg;
    }
};

}  // namespace phigamma
