#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace qtraj {

enum class ErrorKind {
    config,       // malformed user input, unknown kind, bad file
    parameter,    // invalid microstate or physical parameters
    domain,       // evaluation outside a valid domain
    singularity,  // zero denominators, turning points, flat derivatives
    search,       // root/eigenvalue search failed
    integration,  // quality checks on integrated solutions failed
    conversion,   // parameter conversion impossible
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::config: return "config";
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::domain: return "domain";
        case ErrorKind::singularity: return "singularity";
        case ErrorKind::search: return "search";
        case ErrorKind::integration: return "integration";
        case ErrorKind::conversion: return "conversion";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, std::string op, const std::string& message,
          std::optional<double> x = std::nullopt)
        : std::runtime_error(message),
          kind_(kind),
          module_(std::move(module)),
          op_(std::move(op)),
          x_(x) {}

    ErrorKind kind() const { return kind_; }
    const std::string& module() const { return module_; }
    const std::string& op() const { return op_; }
    std::optional<double> x() const { return x_; }

    // user-facing input problems map to exit code 2, everything else to 3
    bool is_config() const {
        return kind_ == ErrorKind::config || kind_ == ErrorKind::parameter ||
               kind_ == ErrorKind::conversion;
    }

private:
    ErrorKind kind_;
    std::string module_;
    std::string op_;
    std::optional<double> x_;
};

}  // namespace qtraj
