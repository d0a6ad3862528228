#pragma once

#include <stdexcept>
#include <string>

namespace masys {

/// Bad caller input: malformed domains, negative right-hand sides, bad
/// config files. The CLI maps this to exit code 2.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative solver hit its iteration cap. Carries the last residual
/// (or increment) it observed so callers can report it.
class NoConvergence : public std::runtime_error {
public:
    NoConvergence(const std::string& what, double last_residual, int iterations)
        : std::runtime_error(what + " (last residual " + std::to_string(last_residual) + " after " +
                             std::to_string(iterations) + " iterations)"),
          last_residual_(last_residual),
          iterations_(iterations) {}

    double last_residual() const noexcept { return last_residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double last_residual_;
    int iterations_;
};

}  // namespace masys
