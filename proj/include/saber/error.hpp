#pragma once

#include <stdexcept>
#include <string>

namespace saber {

/// Failure category; maps one-to-one onto CLI exit codes.
enum class ErrorKind { usage = 1, data = 2, invariant = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error data_error(const std::string& what) { return {ErrorKind::data, what}; }
inline Error usage_error(const std::string& what) { return {ErrorKind::usage, what}; }
inline Error invariant_error(const std::string& what) { return {ErrorKind::invariant, what}; }

} // namespace saber
