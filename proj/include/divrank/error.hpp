#pragma once

#include <stdexcept>
#include <string>

namespace divrank {

// Caller broke a precondition (shape mismatch, out-of-range label, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Invalid hyper-parameter or generator setting.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// On-disk corpus or checkpoint is malformed. `what()` starts with the kind
// string ("bad magic", "blob bounds", ...).
class FormatError : public std::runtime_error {
public:
    FormatError(std::string kind, const std::string& detail)
        : std::runtime_error(detail.empty() ? kind : kind + ": " + detail), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

inline void require(bool ok, const char* msg) {
    if (!ok) throw ContractViolation(msg);
}

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ContractViolation(msg);
}

}  // namespace divrank
