#pragma once

#include <stdexcept>
#include <string>

namespace gmbt {

/// Position of a construct in a source file. Lines are 1-based.
struct SourceLocation {
    std::string file;
    int line = 1;

    bool operator==(const SourceLocation&) const = default;
};

inline std::string to_string(const SourceLocation& loc) {
    return loc.file + ":" + std::to_string(loc.line);
}

/// Raised when a feature file cannot be turned into a syntax tree.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, SourceLocation location)
        : std::runtime_error(to_string(location) + ": " + message),
          location_(std::move(location)) {}

    const SourceLocation& location() const { return location_; }

private:
    SourceLocation location_;
};

/// Versioned-document header does not match what the reader expects.
class SchemaMismatch : public std::runtime_error {
public:
    explicit SchemaMismatch(const std::string& message) : std::runtime_error(message) {}
};

/// Document is not well-formed (truncated file, bad JSON, wrong field types).
class MalformedDocument : public std::runtime_error {
public:
    explicit MalformedDocument(const std::string& message) : std::runtime_error(message) {}
};

/// Failures while talking to an external executor process.
class ProcessError : public std::runtime_error {
public:
    enum class Kind { SpawnFailed, HandshakeTimeout, Timeout, BrokenPipe, MalformedFrame };

    ProcessError(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Test generation requested on a model with no start state.
class NoStartStateError : public std::runtime_error {
public:
    explicit NoStartStateError(const std::string& message) : std::runtime_error(message) {}
};

/// A test-case path violates connectivity or start-state invariants.
class InvalidPathError : public std::runtime_error {
public:
    explicit InvalidPathError(const std::string& message) : std::runtime_error(message) {}
};

/// Shrinking was asked to minimize a test case that does not fail.
class NotFailingError : public std::runtime_error {
public:
    explicit NotFailingError(const std::string& message) : std::runtime_error(message) {}
};

}  // namespace gmbt
