#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ivsel {

// Coarse failure categories surfaced by the CLI as `error[<category>]`.
enum class ErrorCategory { config, data, numeric, contract, argument };

constexpr std::string_view to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return "config";
        case ErrorCategory::data: return "data";
        case ErrorCategory::numeric: return "numeric";
        case ErrorCategory::contract: return "contract";
        case ErrorCategory::argument: return "argument";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}
    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorCategory::config, w) {}
};
struct DataError : Error {
    explicit DataError(const std::string& w) : Error(ErrorCategory::data, w) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error(ErrorCategory::numeric, w) {}
};
struct ContractError : Error {
    explicit ContractError(const std::string& w) : Error(ErrorCategory::contract, w) {}
};
struct ArgumentError : Error {
    explicit ArgumentError(const std::string& w) : Error(ErrorCategory::argument, w) {}
};

}  // namespace ivsel
