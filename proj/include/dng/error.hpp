#pragma once

#include <stdexcept>
#include <string>

namespace dng {

// Process exit codes used by the CLI.
enum class ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kNumericalFailure = 3,
    kSchemaMismatch = 4,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, ExitCode code = ExitCode::kConfigError)
        : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Bad user input: malformed config, invalid arguments, missing files.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, ExitCode::kConfigError) {}
};

/// Non-finite values or diverging solvers/training.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what, ExitCode::kNumericalFailure) {}
};

/// Data or checkpoint layout does not match what the caller expects.
class SchemaMismatch : public Error {
public:
    explicit SchemaMismatch(const std::string& what) : Error(what, ExitCode::kSchemaMismatch) {}
};

}  // namespace dng
