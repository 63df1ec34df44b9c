#pragma once

#include <stdexcept>
#include <string>

namespace bwm {

// Bad parameters, unreadable keys, inconsistent configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Text or ids that cannot be mapped through the vocabulary.
class TokenizeError : public std::runtime_error {
public:
    explicit TokenizeError(const std::string& what) : std::runtime_error(what) {}
};

// A digit sequence that cannot be a tag (digit >= v, or value overflow).
class MalformedTrigger : public std::runtime_error {
public:
    explicit MalformedTrigger(const std::string& what) : std::runtime_error(what) {}
};

// Upstream endpoint unreachable or answered garbage.
class NetworkError : public std::runtime_error {
public:
    explicit NetworkError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bwm
