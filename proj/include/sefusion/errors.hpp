#pragma once

#include <stdexcept>
#include <string>

namespace sefusion {

// Error taxonomy. Each kind maps to a distinct CLI exit code (see cli.hpp).
enum class ErrorKind {
    Shape,     // operand shapes incompatible with an operation
    Data,      // input values violate a contract (range, labels, ...)
    Contract,  // API misuse (non-scalar loss, misaligned optimizer state, ...)
    State,     // object in the wrong lifecycle state (tape already consumed)
    Format,    // malformed or mismatched file content
    Config,    // invalid run configuration
    Io,        // filesystem / OS failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error(ErrorKind::Shape, m) {}
};
struct DataError : Error {
    explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};
struct ContractError : Error {
    explicit ContractError(const std::string& m) : Error(ErrorKind::Contract, m) {}
};
struct StateError : Error {
    explicit StateError(const std::string& m) : Error(ErrorKind::State, m) {}
};
struct FormatError : Error {
    explicit FormatError(const std::string& m) : Error(ErrorKind::Format, m) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorKind::Config, m) {}
};
struct IoError : Error {
    explicit IoError(const std::string& m) : Error(ErrorKind::Io, m) {}
};

}  // namespace sefusion
