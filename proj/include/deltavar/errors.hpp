#pragma once

#include <stdexcept>
#include <string>

namespace deltavar {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: non-finite entries, dimension mismatch, malformed config.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A factorization did not succeed (e.g. SVD non-convergence).
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::string diagnostics)
        : Error(what + " [" + diagnostics + "]"), diagnostics_(std::move(diagnostics)) {}
    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

/// A block that must be invertible is numerically singular.
class RankDeficiencyError : public Error {
public:
    RankDeficiencyError(const std::string& what, std::string block)
        : Error(what), block_(std::move(block)) {}
    const std::string& block() const noexcept { return block_; }

private:
    std::string block_;
};

/// The added regressors are a linear map of the canonical ones.
class CategoryOneDetected : public RankDeficiencyError {
public:
    using RankDeficiencyError::RankDeficiencyError;
};

class NonConvergenceError : public Error {
public:
    using Error::Error;
};

/// Regressor compatibility phi^T = phi_c^T T failed; carries the worst input.
class StructuralError : public Error {
public:
    StructuralError(const std::string& what, double worst_input)
        : Error(what), worst_input_(worst_input) {}
    double worst_input() const noexcept { return worst_input_; }

private:
    double worst_input_;
};

/// An internal algebraic identity was violated beyond tolerance.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

class PsdViolationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace deltavar
