#pragma once

#include <stdexcept>
#include <string>

namespace reinverify {

struct SyntaxError : std::runtime_error {
    int line;
    int column;
    SyntaxError(int line_, int column_, const std::string& msg)
        : std::runtime_error("syntax error at " + std::to_string(line_) + ":" +
                             std::to_string(column_) + ": " + msg),
          line(line_), column(column_) {}
};

struct SemanticError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExpansionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownParameter : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    long offset;  // byte offset into the file, -1 if unknown
    FormatError(const std::string& msg, long offset_ = -1)
        : std::runtime_error(offset_ >= 0 ? msg + " (at byte " + std::to_string(offset_) + ")"
                                          : msg),
          offset(offset_) {}
};

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonPiecewiseLinear : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnboundedInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotInductible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownVerdict : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptySpec : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoBreakpoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NeverChanges : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoCounterfactual : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LpError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace reinverify
