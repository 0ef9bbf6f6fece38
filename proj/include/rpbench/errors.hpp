#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rpbench {

// Base error for everything the toolkit raises on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(std::string message) : std::runtime_error(std::move(message)) {}
};

// Structured decode failure carrying a JSON-pointer-ish path ("$.attributes[2].key").
class ParseError : public Error {
public:
    ParseError(std::string path, std::string message)
        : Error(path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// A model reply that could not be parsed into the expected structure.
class UnparseableReply : public Error {
public:
    explicit UnparseableReply(std::string message) : Error(std::move(message)) {}
};

// Parsed fine but the value is outside the legal range.
class OutOfRange : public Error {
public:
    OutOfRange(long long value, std::string message)
        : Error(std::move(message)), value_(value) {}

    long long value() const { return value_; }

private:
    long long value_;
};

// Validation of a domain object failed; carries one message per violation.
class ValidationFailed : public Error {
public:
    explicit ValidationFailed(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const { return violations_; }

private:
    static std::string join(const std::vector<std::string>& vs) {
        std::string out = "validation failed:";
        for (const auto& v : vs) {
            out += " [" + v + "]";
        }
        return out;
    }

    std::vector<std::string> violations_;
};

}  // namespace rpbench
