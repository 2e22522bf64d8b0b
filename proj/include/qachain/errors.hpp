#pragma once

#include <stdexcept>
#include <string>

namespace qachain {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad sizes, out-of-range parameters and domain violations.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Non-finite values or corrupted numerical state.
class NumericError : public Error {
public:
    using Error::Error;
};

/// The requested state has no Gaussian representation on the fermion vacuum.
class NonRepresentableError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Raised by the ODE drivers; carries the time reached and a short diagnostic.
class IntegrationError : public NumericError {
public:
    IntegrationError(double t, std::string diagnostics)
        : NumericError("integration failed at t=" + std::to_string(t) + ": " + diagnostics),
          t_(t),
          diagnostics_(std::move(diagnostics)) {}

    double time() const noexcept { return t_; }
    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    double t_;
    std::string diagnostics_;
};

}  // namespace qachain
