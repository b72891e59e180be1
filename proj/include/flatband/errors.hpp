#pragma once

#include <stdexcept>
#include <string>

namespace flatband {

/// Coarse error category, mapped onto CLI exit codes by the runner.
enum class ErrorCategory { config, numeric, io };

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string name, const std::string& message)
        : std::runtime_error(name + ": " + message), category_(category), name_(std::move(name)) {}

    ErrorCategory category() const noexcept { return category_; }
    const std::string& name() const noexcept { return name_; }

private:
    ErrorCategory category_;
    std::string name_;
};

#define FLATBAND_DEFINE_ERROR(Type, Category)                                          \
    class Type : public Error {                                                        \
    public:                                                                            \
        explicit Type(const std::string& message) : Error(Category, #Type, message) {} \
    };

// lattice-models / wannier / dissipation-kernel
FLATBAND_DEFINE_ERROR(InvalidSpec, ErrorCategory::config)
FLATBAND_DEFINE_ERROR(FlatBandViolation, ErrorCategory::numeric)
FLATBAND_DEFINE_ERROR(QuadratureNotConverged, ErrorCategory::numeric)
FLATBAND_DEFINE_ERROR(KernelNotPositive, ErrorCategory::numeric)

// gaussian-steady-state
FLATBAND_DEFINE_ERROR(SingularDrift, ErrorCategory::numeric)
FLATBAND_DEFINE_ERROR(UnstablePump, ErrorCategory::numeric)
FLATBAND_DEFINE_ERROR(ZeroDensitySite, ErrorCategory::numeric)
FLATBAND_DEFINE_ERROR(NonPositiveDensity, ErrorCategory::numeric)

// approx-models
FLATBAND_DEFINE_ERROR(NegativeHoppingRate, ErrorCategory::numeric)
FLATBAND_DEFINE_ERROR(DegenerateDenominator, ErrorCategory::numeric)

// interactions
FLATBAND_DEFINE_ERROR(MissingEntry, ErrorCategory::numeric)
FLATBAND_DEFINE_ERROR(FockCutoffInsufficient, ErrorCategory::numeric)

// lindblad-dense
FLATBAND_DEFINE_ERROR(DimensionTooLarge, ErrorCategory::config)
FLATBAND_DEFINE_ERROR(DegenerateSteadyState, ErrorCategory::numeric)
FLATBAND_DEFINE_ERROR(SteadyStateNotConverged, ErrorCategory::numeric)
FLATBAND_DEFINE_ERROR(ZeroTotalDensity, ErrorCategory::numeric)

// cli-runner
FLATBAND_DEFINE_ERROR(ConfigInvalid, ErrorCategory::config)
FLATBAND_DEFINE_ERROR(IoError, ErrorCategory::io)

#undef FLATBAND_DEFINE_ERROR

/// Wraps a module error with the experiment context; keeps the original category.
class ExperimentFailed : public Error {
public:
    ExperimentFailed(const std::string& experiment, const Error& cause)
        : Error(cause.category(), "ExperimentFailed", experiment + ": " + cause.what()),
          cause_name_(cause.name()) {}

    const std::string& cause_name() const noexcept { return cause_name_; }

private:
    std::string cause_name_;
};

} // namespace flatband
