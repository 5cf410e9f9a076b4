#pragma once

#include <stdexcept>
#include <string>

namespace crosscov {

/// Base for every error raised by the library. `code()` is a stable
/// identifier used in CSV error columns and CLI diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define CROSSCOV_DEFINE_ERROR(Name)                                     \
    class Name : public Error {                                         \
    public:                                                             \
        explicit Name(const std::string& what) : Error(#Name, what) {}  \
    }

CROSSCOV_DEFINE_ERROR(InvalidMatrix);
CROSSCOV_DEFINE_ERROR(NotPSD);
CROSSCOV_DEFINE_ERROR(ZeroCovariance);
CROSSCOV_DEFINE_ERROR(ShapeError);
CROSSCOV_DEFINE_ERROR(InvalidSpectrum);
CROSSCOV_DEFINE_ERROR(InvalidCoupling);
CROSSCOV_DEFINE_ERROR(InfeasibleCoupling);
CROSSCOV_DEFINE_ERROR(MissingResiduals);
CROSSCOV_DEFINE_ERROR(EstimateUnstable);
CROSSCOV_DEFINE_ERROR(InvalidDirection);
CROSSCOV_DEFINE_ERROR(InvalidArgument);
CROSSCOV_DEFINE_ERROR(RegimeAmbiguous);
CROSSCOV_DEFINE_ERROR(ConfigError);

#undef CROSSCOV_DEFINE_ERROR

/// Power iteration did not reach its tolerance, even after the restart.
/// The best estimate seen is kept so callers can decide what to do.
class ConvergenceFailure : public Error {
public:
    ConvergenceFailure(const std::string& what, double best_estimate)
        : Error("ConvergenceFailure", what), best_estimate_(best_estimate) {}

    double best_estimate() const noexcept { return best_estimate_; }

private:
    double best_estimate_;
};

}  // namespace crosscov
