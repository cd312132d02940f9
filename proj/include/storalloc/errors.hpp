#pragma once

#include <stdexcept>
#include <string>

namespace storalloc {

// Thrown when an exact-analysis operation would exceed its size guard.
struct GuardError : std::runtime_error {
    explicit GuardError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on malformed or inconsistent user configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace storalloc
