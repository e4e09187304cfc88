#pragma once

#include <stdexcept>
#include <string>

namespace brenier {

// Every failure raised by the library derives from Error so callers can
// catch one type. The subclasses name the failure, not the module.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ContractViolation : public Error { using Error::Error; };
class UnsupportedKind : public Error { using Error::Error; };
class GoodnessViolation : public Error { using Error::Error; };
class SingularMatrix : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class StencilError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class MassError : public Error { using Error::Error; };
class ScheduleError : public Error { using Error::Error; };
class DegenerateSolution : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// Wraps an error raised by one stage of a multi-stage pipeline.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace brenier
