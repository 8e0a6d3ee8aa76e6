#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace expandernet {

/// Base of every library error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define EXPANDERNET_ERROR(Name)             \
    class Name : public Error {             \
    public:                                 \
        using Error::Error;                 \
    }

EXPANDERNET_ERROR(JunctionDegreeError);
EXPANDERNET_ERROR(RefinementOverflow);
EXPANDERNET_ERROR(TemplateMismatch);
EXPANDERNET_ERROR(DegenerateFace);
EXPANDERNET_ERROR(NotManifoldVertex);
EXPANDERNET_ERROR(GridTooSmall);
EXPANDERNET_ERROR(NotGraphical);
EXPANDERNET_ERROR(NotOnHyperboloid);
EXPANDERNET_ERROR(OnIdealBoundary);
EXPANDERNET_ERROR(OpenLink);
EXPANDERNET_ERROR(EmptyShell);
EXPANDERNET_ERROR(InvalidComplex);
EXPANDERNET_ERROR(InvalidArgument);
EXPANDERNET_ERROR(LineSearchFailure);
EXPANDERNET_ERROR(TopologyBroken);

#undef EXPANDERNET_ERROR

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace expandernet
