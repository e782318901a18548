#pragma once

#include <stdexcept>
#include <string>

namespace gazeguide {

/// Base of every error the engine throws. Validation errors signal bad input
/// (CLI exit code 2); backend errors signal a remote dependency failed (exit 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    using Error::Error;
};

#define GAZEGUIDE_VALIDATION_ERROR(Name)              \
    class Name : public ValidationError {             \
    public:                                           \
        using ValidationError::ValidationError;       \
    }

GAZEGUIDE_VALIDATION_ERROR(EmptyPassage);
GAZEGUIDE_VALIDATION_ERROR(CapacityError);
GAZEGUIDE_VALIDATION_ERROR(FrameTooSmall);
GAZEGUIDE_VALIDATION_ERROR(OutOfOrderSample);
GAZEGUIDE_VALIDATION_ERROR(SchemaViolation);
GAZEGUIDE_VALIDATION_ERROR(PassageMismatch);
GAZEGUIDE_VALIDATION_ERROR(ScriptTargetMissing);
GAZEGUIDE_VALIDATION_ERROR(ScriptInvalid);
GAZEGUIDE_VALIDATION_ERROR(UnpairedSession);
GAZEGUIDE_VALIDATION_ERROR(SessionClosed);

#undef GAZEGUIDE_VALIDATION_ERROR

/// A remote LLM or judge backend failed after all retries.
class BackendUnavailable : public BackendError {
public:
    BackendUnavailable(const std::string& what, int attempts)
        : BackendError(what + " (after " + std::to_string(attempts) + " attempt(s))"),
          attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// The judge replied twice with something outside the output contract.
class JudgeParseError : public BackendError {
public:
    using BackendError::BackendError;
};

} // namespace gazeguide
