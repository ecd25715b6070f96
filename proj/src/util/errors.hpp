#pragma once

#include <stdexcept>
#include <string>

namespace cotaudit {

// Error categories map one-to-one onto the C API status codes and the CLI
// exit codes, so they are part of the public contract.
enum class ErrorCode {
    invalid_argument,
    config,
    model,
    dataset,
    io,
    endpoint,
    internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(const std::string& msg) {
    throw Error(ErrorCode::invalid_argument, msg);
}
[[noreturn]] inline void throw_config(const std::string& msg) {
    throw Error(ErrorCode::config, msg);
}
[[noreturn]] inline void throw_model(const std::string& msg) {
    throw Error(ErrorCode::model, msg);
}
[[noreturn]] inline void throw_dataset(const std::string& msg) {
    throw Error(ErrorCode::dataset, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
    throw Error(ErrorCode::io, msg);
}
[[noreturn]] inline void throw_endpoint(const std::string& msg) {
    throw Error(ErrorCode::endpoint, msg);
}

}  // namespace cotaudit
