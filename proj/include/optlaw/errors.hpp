#pragma once

#include <stdexcept>
#include <string>

namespace optlaw {

// Error taxonomy shared by the library and the CLI.
// Exit codes: 2 = usage/argument, 3 = data, 4 = numerical.
class Error : public std::runtime_error {
public:
    Error(std::string msg, int code) : std::runtime_error(std::move(msg)), code_(code) {}
    int exit_code() const noexcept { return code_; }

private:
    int code_;
};

class UsageError : public Error {
public:
    explicit UsageError(std::string msg) : Error(std::move(msg), 2) {}
};

class DataError : public Error {
public:
    explicit DataError(std::string msg) : Error(std::move(msg), 3) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(std::string msg) : Error(std::move(msg), 4) {}
};

}  // namespace optlaw
