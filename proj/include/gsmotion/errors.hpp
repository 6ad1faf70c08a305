#pragma once

#include <stdexcept>
#include <string>

namespace gsmotion {

/// A kernel or filter parameter lies outside its valid domain
/// (non-positive sigma, |rho| >= 1, negative color coefficient, ...).
class ParameterDomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Caller violated an operation precondition (mismatched frame sizes,
/// misaligned motion field, empty input).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent configuration. `key()` names the offending entry
/// when one can be identified.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every randomly drawn kernel was pruned; retry with another seed.
class InitializationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gsmotion
